#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "thinhom/solver.hpp"

namespace thinhom {

enum class CellFormulation { Constrained, Penalized };

/// One finite-cell minimization on (tQ') x (-1/2, 1/2): either the
/// tangent-constrained problem (fields valued in T_s(M), zero lateral trace)
/// or the penalized one (free R^3 fields, perturbed density).
struct CellProblem {
  ManifoldDescriptor manifold = ManifoldDescriptor::sphere(1.0);
  Vec3 base_point = Vec3::UnitZ();
  Mat32 xi_alpha = Mat32::Zero();  // columns in T_s(M), residual <= 1e-10
  int t = 1;                       // cell size, positive integer
  int n = 32;                      // grid resolution per unit length, >= 4
  CellFormulation formulation = CellFormulation::Constrained;
  IntegrandSpec integrand;
  double epsilon = 1e-6;
  QuadratureRule quad{2};
  SolverSettings solver;
};

struct CellSolution {
  double value = 0.0;  // normalized infimum (mean over the cell)
  DiscreteField argmin;
  double gradient_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  CellFormulation formulation = CellFormulation::Constrained;
  int t = 1;
  int n = 0;
  double epsilon = 0.0;
  std::vector<IterRecord> log;
};

CellSolution solve_cell(const CellProblem& problem);

struct EqualityReport {
  CellSolution constrained;
  CellSolution penalized;
  double relative_gap = 0.0;  // |Tf_t - fbar_t| / max(Tf_t, 1e-12)
};

/// Both formulations on identical grids, per the finite-t equality.
EqualityReport check_constrained_penalized_equality(CellProblem problem);

struct HomDensityEstimate {
  double estimate = 0.0;
  std::vector<std::pair<int, double>> per_t;  // raw penalized values
  bool converged = false;
  bool extrapolated = false;
  int iterations = 0;  // summed over solves
};

/// Penalized solves over increasing integer t. Flat sequences (within
/// max(0.01 v, 1e-8)) report the raw largest-t value; otherwise the t -> inf
/// limit is extrapolated from the 1/t decay of the Dirichlet boundary layer
/// (two-point Richardson for two t's, a 1/t + 1/t^2 fit through the last
/// three otherwise). The flag records agreement of the last two extrapolants.
HomDensityEstimate estimate_hom_density(const CellProblem& base,
                                        const std::vector<int>& t_list);

/// Sampled homogenized density over a tangent-coordinate grid per base point.
/// Interpolation is multilinear in the 4 tangent coordinates (basis index i,
/// column j -> axis 2*i + j) and nearest-neighbor in s.
class DensityTable {
 public:
  ManifoldDescriptor manifold = ManifoldDescriptor::sphere(1.0);
  double p = 2.0;
  GrowthConstants growth;
  double envelope_C = 1.0;
  std::vector<TangentFrame> frames;
  double xi_max = 1.0;
  int m = 3;  // grid points per axis
  std::vector<int> t_list{1};
  int n = 8;
  std::vector<double> values;          // frames x m^4, row-major over axes
  std::vector<std::uint8_t> converged;
  int envelope_violations = 0;

  std::int64_t entries_per_frame() const;
  std::int64_t index(int k, const std::array<int, 4>& idx) const;
  std::array<double, 4> coords_at(const std::array<int, 4>& idx) const;
  Mat32 xi_from_coords(int k, const std::array<double, 4>& c) const;
  std::array<double, 4> coords_of(int k, const Mat32& xi) const;
  int nearest_base(const Vec3& s) const;

  /// Multilinear interpolation; coordinates outside the range are clamped and
  /// counted into *clamped when provided.
  double query_coords(int k, std::array<double, 4> c, int* clamped = nullptr) const;
  double query(const Vec3& s, const Mat32& xi_tangent, int* clamped = nullptr) const;
  /// Value and d/dc of the interpolant (piecewise constant per cell per axis).
  double query_coords_grad(int k, std::array<double, 4> c,
                           std::array<double, 4>& dc, int* clamped = nullptr) const;

  bool in_range(const std::array<double, 4>& c, double margin = 0.0) const;
};

struct TableBuildParams {
  std::vector<Vec3> base_points;
  double xi_max = 1.0;
  int m = 3;
  std::vector<int> t_list{1};
  int n = 8;
  IntegrandSpec integrand;
  double epsilon = 1e-6;
  QuadratureRule quad{2};
  SolverSettings solver;
};

DensityTable build_density_table(const ManifoldDescriptor& manifold,
                                 const TableBuildParams& params);

/// CSV persistence (header "s_index,c0,c1,c2,c3,value,converged,t_max,n")
/// plus a JSON metadata sidecar carrying manifold, frames and parameters.
void save_table(const DensityTable& table, const std::string& csv_path,
                const std::string& meta_path);
DensityTable load_table(const std::string& csv_path, const std::string& meta_path);

}  // namespace thinhom
