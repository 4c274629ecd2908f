#pragma once

#include <array>
#include <optional>
#include <vector>

#include "thinhom/cell.hpp"

namespace thinhom {

/// The rescaled thin-film problem on Omega = omega x (-1/2, 1/2): energy
/// integral of f(x_alpha/h, x3, grad_h u) over manifold-valued u matching the
/// lateral datum g(x_alpha) = Pi(s0 + xi0 x_alpha).
struct FilmProblem {
  IntegrandSpec integrand;
  ManifoldDescriptor manifold = ManifoldDescriptor::sphere(1.0);
  double h = 0.5;
  Vec3 s0 = Vec3::UnitZ();
  Mat32 xi0 = Mat32::Zero();  // columns in T_{s0}(M)
  std::array<int, 3> grid{9, 9, 3};
  std::array<double, 2> omega{1.0, 1.0};
  double epsilon = 1e-6;
  QuadratureRule quad{2};
  SolverSettings solver;

  Vec3 datum(double x1, double x2) const;
};

/// Nodal extension of the boundary datum (x3-independent, manifold-valued).
DiscreteField film_datum_extension(const FilmProblem& problem);

/// I^h(u). Checks the lateral datum (within 1e-10) unless check_bc is false;
/// recovery diagnostics evaluate fields that are not datum-compatible.
double eval_film_energy(const DiscreteField& u, const FilmProblem& problem,
                        bool check_bc = true);

/// Projected-gradient descent with nearest-point retraction from the datum
/// extension (or `start`, which must satisfy the datum). Returns the discrete
/// minimum found; global optimality is not claimed.
std::pair<DiscreteField, SolveStats> minimize_film(
    const FilmProblem& problem, const DiscreteField* start = nullptr);

/// x3-independent manifold-valued fields on omega, realizing the limit
/// problem's unknowns on a 2D grid.
struct PlanarField {
  std::array<int, 2> nodes{3, 3};
  std::array<double, 2> omega{1.0, 1.0};
  ManifoldDescriptor manifold = ManifoldDescriptor::sphere(1.0);
  std::vector<Vec3> values;

  std::int64_t num_nodes() const { return std::int64_t(nodes[0]) * nodes[1]; }
  std::int64_t node_index(int i, int j) const {
    return std::int64_t(j) * nodes[0] + i;
  }
  Eigen::Vector2d node_position(int i, int j) const {
    return {-0.5 * omega[0] + i * omega[0] / (nodes[0] - 1),
            -0.5 * omega[1] + j * omega[1] / (nodes[1] - 1)};
  }
  Vec3 sample(const Eigen::Vector2d& x) const;  // bilinear
  bool boundary(int i, int j) const {
    return i == 0 || i == nodes[0] - 1 || j == 0 || j == nodes[1] - 1;
  }
};

PlanarField planar_datum(const ManifoldDescriptor& manifold, const Vec3& s0,
                         const Mat32& xi0, std::array<int, 2> nodes,
                         std::array<double, 2> omega);

struct LimitEnergyDiagnostics {
  int out_of_range = 0;       // clamped quadrature lookups
  double max_drift = 0.0;     // |(I - P_u) grad u| before projection
};

/// Quadrature of the table-interpolated homogenized density over omega; the
/// in-plane gradient is tangent-projected at every quadrature point before
/// lookup.
double eval_limit_energy(const PlanarField& u, const DensityTable& table,
                         LimitEnergyDiagnostics* diag = nullptr);

/// Descent for the table-based limit functional with the same datum family.
std::pair<PlanarField, SolveStats> minimize_limit(
    const DensityTable& table, const ManifoldDescriptor& manifold,
    const Vec3& s0, const Mat32& xi0, std::array<int, 2> nodes,
    std::array<double, 2> omega, const SolverSettings& solver);

/// Gamma-limsup recovery construction: u_k = Pi(w_k) with
///   w_k(x) = u(x_alpha) + h zeta(u(x_alpha) - s0) phi(x_alpha/h, x3),
/// phi the cell corrector extended t-periodically in-plane (anchored at the
/// domain corner so phi vanishes on the lateral boundary whenever t divides
/// L/h), zeta the radial smoothstep with plateau delta/4 and support delta/2.
struct RecoveryParams {
  Vec3 s0 = Vec3::UnitZ();
  const DiscreteField* corrector = nullptr;  // solve_cell argmin at (s0, xi0)
  int corrector_t = 1;
  double delta = 0.25;
};

DiscreteField build_recovery_sequence(const PlanarField& u,
                                      const RecoveryParams& params, double h_k,
                                      std::array<int, 3> film_grid,
                                      std::array<double, 2> omega);

/// sup_n |u_k(node) - u(x_alpha(node))|.
double recovery_sup_distance(const DiscreteField& u_k, const PlanarField& u);

}  // namespace thinhom
