#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "thinhom/grid.hpp"
#include "thinhom/integrand.hpp"

namespace thinhom {

/// Tensor Gauss quadrature, order 1 or 2 points per axis. Weights sum to the
/// cell volume; order 2 integrates trilinear-squared energies exactly on
/// elements with constant coefficient.
struct QuadratureRule {
  int order = 2;

  static QuadratureRule gauss(int order);
  int points() const { return order * order * order; }
};

struct GradientScale {
  double s1 = 1.0, s2 = 1.0, s3 = 1.0;  // (1, 1, 1/h) for film energies
};

/// What gets integrated: the raw density f (coefficient optionally looked up
/// at rescaled in-plane coordinates, for f(x_alpha/h, x3, .)) or the
/// perturbed density fbar(., s, .) with a fixed frame.
struct DensityParams {
  IntegrandSpec f;
  std::optional<TangentFrame> frame;
  double coeff_rescale = 1.0;
  double epsilon = 0.0;  // p-power regularization inside discrete energies
};

/// Preassembled, iteration-independent data for one energy: shape-gradient
/// tables, cached coefficient values at every quadrature point, Dirichlet
/// mask, 8-coloring for the scatter. Kernels evaluate energies/gradients of
/// the *normalized* functional (mean over the cell for cell domains, plain
/// integral for films).
class AssemblyPlan {
 public:
  AssemblyPlan(const Grid& grid, const SlabDomain& domain, DensityParams density,
               Mat32 offset, GradientScale scale, QuadratureRule quad,
               std::vector<std::uint8_t> fixed_nodes);

  /// OpenMP kernels and their serial twins. The parallel versions use a
  /// fixed-order chunked reduction / 8-color scatter, so all four are
  /// bit-identical for any thread count.
  double energy(const std::vector<Vec3>& values) const;
  double energy_serial(const std::vector<Vec3>& values) const;
  void gradient(const std::vector<Vec3>& values, std::vector<Vec3>& out) const;
  void gradient_serial(const std::vector<Vec3>& values, std::vector<Vec3>& out) const;

  /// max_n |g_n| * residual_weight(n): the discrete Euler-Lagrange residual
  /// density, intensive in grid size and domain volume.
  double normalized_residual(const std::vector<Vec3>& gradient) const;

  const Grid& grid() const { return grid_; }
  const std::vector<std::uint8_t>& fixed() const { return fixed_; }
  std::int64_t num_quadrature_points() const {
    return grid_.num_elements() * quad_points_;
  }

 private:
  template <class Density, bool Parallel>
  double energy_impl(const std::vector<Vec3>& values) const;
  template <class Density, bool Parallel>
  void gradient_impl(const std::vector<Vec3>& values, std::vector<Vec3>& out) const;

  Grid grid_;
  double normalization_ = 1.0;  // 1/t^2 for cells, 1 for films
  Mat32 offset_ = Mat32::Zero();
  int quad_points_ = 8;
  double weight_ = 0.0;  // uniform quadrature weight (incl. normalization)
  int density_tag_ = 0;
  DensityParams density_;
  Mat3 proj_ = Mat3::Identity();
  std::vector<Eigen::Matrix<double, 3, 8>> shape_grad_;  // per qp, per node
  std::vector<double> coeff_;                            // per element * qp
  std::vector<std::uint8_t> fixed_;
  std::vector<double> residual_weight_;
  std::array<std::vector<std::int32_t>, 8> colors_;      // element ids by parity
  std::array<std::int64_t, 8> node_offsets_{};
};

/// Spec-level wrappers. `offset` is the constant in-plane matrix added to the
/// in-plane gradient columns; `parallel` switches between the OpenMP kernels
/// and the serial reference (identical results).
double assemble_energy(const DiscreteField& field, const DensityParams& density,
                       const std::optional<Mat32>& offset, GradientScale scale,
                       QuadratureRule quad = {}, bool parallel = true);

std::vector<Vec3> assemble_gradient(const DiscreteField& field,
                                    const DensityParams& density,
                                    const std::optional<Mat32>& offset,
                                    GradientScale scale, QuadratureRule quad = {},
                                    bool parallel = true);

/// Plan shared by the spec wrappers and the solvers.
AssemblyPlan make_plan(const DiscreteField& field, const DensityParams& density,
                       const std::optional<Mat32>& offset, GradientScale scale,
                       QuadratureRule quad);

}  // namespace thinhom
