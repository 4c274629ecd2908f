#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "thinhom/verify.hpp"

namespace thinhom {

struct SolverConfig {
  double tolerance = 1e-8;
  int max_iterations = 20000;
  std::string step_rule = "bb";

  SolverSettings settings(bool keep_log = false) const {
    return {tolerance, max_iterations, step_rule, 1e-4, keep_log};
  }
};

struct CellBlock {
  Vec3 s = Vec3::UnitZ();
  Mat32 xi_alpha = Mat32::Zero();
  std::vector<int> t_list{1, 2, 4};
  int n = 32;
  std::string formulation = "both";  // constrained | penalized | both
};

struct TableBlock {
  std::vector<Vec3> s_list{Vec3::UnitZ()};
  double xi_max = 1.0;
  int m = 5;
  std::vector<int> t_list{1, 2, 4};
  int n = 32;
};

struct FilmBlock {
  std::vector<double> h_list{0.5, 0.25, 0.125};
  Vec3 s0 = Vec3::UnitZ();
  Mat32 xi0 = Mat32::Zero();
  std::vector<std::array<int, 3>> grids;  // one per h
  std::array<double, 2> omega{1.0, 1.0};
  std::array<int, 2> planar_grid{17, 17};
};

struct GammaBlock {
  int corrector_t = 1;
  int corrector_n = 8;
  double delta = 0.25;
};

struct RecoverBlock {
  std::vector<double> h_list{0.25, 0.125, 0.0625};
  double delta = 0.45;
  int t = 1;
  int n = 8;
  std::vector<std::array<int, 3>> grids;  // one per h
};

struct CheckBlock {
  std::vector<std::string> suites{"quasiconvexity", "growth_lipschitz", "rank_one"};
  double slack = 0.005;       // structural inequalities
  double drift_tol = 0.10;    // Lipschitz-ratio stability
  int n_tests = 50;
  int n_segments = 100;
  std::vector<std::array<double, 4>> xi_points;  // tangent coords; defaults inside
};

struct RunConfig {
  ManifoldDescriptor manifold = ManifoldDescriptor::sphere(1.0);
  IntegrandSpec integrand;
  std::optional<CellBlock> cell;
  std::optional<TableBlock> table;
  std::optional<FilmBlock> film;
  std::optional<GammaBlock> gamma;
  std::optional<RecoverBlock> recover;
  std::optional<CheckBlock> check;
  // load a persisted table instead of building one
  std::optional<std::pair<std::string, std::string>> table_files;  // csv, meta
  double epsilon = 1e-6;
  std::uint64_t seed = 42;
  int quad_order = 2;
  SolverConfig solver;

  /// Fully materialized config (all defaults filled); reparsing the echo
  /// reproduces an identical RunConfig.
  nlohmann::json echo() const;
};

/// Strict parse: unknown keys raise SchemaError with the key's path; p <= 1
/// and theta outside (0,1) raise RangeError.
RunConfig parse_config(const std::string& text);

/// Run one subcommand, writing artifacts under out_dir. Returns 0 on success,
/// 1 when results carry non-convergence flags. Errors throw.
int dispatch(const std::string& command, const RunConfig& config,
             const std::string& out_dir);

}  // namespace thinhom
