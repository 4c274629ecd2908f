#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "thinhom/film.hpp"

namespace thinhom {

/// Outcome of one property suite. pass <=> worst_violation <= tolerance.
struct PropertyReport {
  std::string name;
  int samples = 0;
  double worst_violation = 0.0;  // signed, relative; positive = violated
  double tolerance = 0.0;
  bool pass = true;
  nlohmann::json provenance;  // grids, seeds, slacks, extra measurements

  nlohmann::json to_json() const;
};

/// Tangential quasiconvexity of the tabulated density: for random
/// zero-boundary tangent-valued psi, table(s, xi) <= avg table(s, xi + grad psi).
/// psi is bilinear on a psi_grid^2 mesh of Q', gradient amplitude scaled to
/// 0.3 * xi_max. Throws OutOfTableRange when (s, xi) leaves no such margin.
PropertyReport verify_quasiconvexity(const DensityTable& table, const Vec3& s,
                                     const Mat32& xi_alpha, int n_tests,
                                     std::uint64_t seed, double slack = 0.005,
                                     int psi_grid = 5);

/// (a) p-growth envelope with the certified constants on every entry;
/// (b) empirical Lipschitz ratio over entry pairs, and its stability against
/// a table rebuilt at doubled cell resolution when one is provided.
PropertyReport verify_lipschitz_growth(const DensityTable& table,
                                       const DensityTable* refined = nullptr,
                                       double drift_tol = 0.10);

/// Midpoint convexity along tangent rank-one segments xi + lambda a (x) nu.
PropertyReport verify_rank_one(const DensityTable& table, const Vec3& s,
                               int n_segments, std::uint64_t seed,
                               double slack = 0.005);

struct GammaRow {
  double h = 0.0;
  double E_h = 0.0;               // min of the two descents below
  double E_datum_start = 0.0;
  double E_recovery_start = 0.0;
  double recovery_energy = 0.0;   // I^h of the recovery field (admissible)
  double gap = 0.0;               // |E_h - E_limit| / max(E_limit, 1e-12)
  int iterations = 0;
  bool converged = true;
  bool recovery_bound_ok = true;  // E_h <= recovery_energy, exact
};

struct GammaReport {
  std::vector<GammaRow> rows;     // strictly decreasing h
  double limit_energy = 0.0;      // E* of the planar minimizer via the table
  double planar_iterations = 0;
  LimitEnergyDiagnostics limit_diag;
  nlohmann::json provenance;

  nlohmann::json to_json() const;
};

struct GammaExperimentConfig {
  IntegrandSpec integrand;
  ManifoldDescriptor manifold = ManifoldDescriptor::sphere(1.0);
  Vec3 s0 = Vec3::UnitZ();
  Mat32 xi0 = Mat32::Zero();
  std::vector<double> h_list;                 // strictly decreasing
  std::vector<std::array<int, 3>> grids;      // one per h
  std::array<double, 2> omega{1.0, 1.0};
  std::array<int, 2> planar_grid{17, 17};
  int corrector_t = 1;                        // must divide L/h for every h
  int corrector_n = 8;
  double delta = 0.25;
  double epsilon = 1e-6;
  QuadratureRule quad{2};
  SolverSettings solver;
};

/// Full ladder: per h, film minimization from the datum extension and from
/// the recovery field (built on the planar limit minimizer); E_h is the
/// better of the two, so the recovery upper bound is exact by descent.
GammaReport run_gamma_experiment(const GammaExperimentConfig& config,
                                 const DensityTable& table);

void print_report(const PropertyReport& report);
void print_report(const GammaReport& report);

}  // namespace thinhom
