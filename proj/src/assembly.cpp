#include "thinhom/assembly.hpp"

#include <cmath>

#include "thinhom/parallel.hpp"

namespace thinhom {

QuadratureRule QuadratureRule::gauss(int order) {
  if (order != 1 && order != 2)
    throw RangeError("quadrature order must be 1 or 2");
  return {order};
}

namespace {

// Density kernels evaluated per quadrature point. rho(A, a) is the integrand
// value at gradient matrix A and coefficient a; drho its derivative in A.

struct IsoP2 {
  double rho(const Mat3& A, double a) const { return a * A.squaredNorm(); }
  Mat3 drho(const Mat3& A, double a) const { return 2.0 * a * A; }
};

struct IsoGen {
  double p, eps;
  double rho(const Mat3& A, double a) const {
    return a * power_p(A.squaredNorm(), p, eps);
  }
  Mat3 drho(const Mat3& A, double a) const {
    return a * power_p_dfactor(A.squaredNorm(), p, eps) * A;
  }
};

struct ColGen {
  double p, eps;
  Vec3 w;
  double rho(const Mat3& A, double a) const {
    double v = 0.0;
    for (int j = 0; j < 3; ++j)
      v += w[j] * power_p(A.col(j).squaredNorm(), p, eps);
    return a * v;
  }
  Mat3 drho(const Mat3& A, double a) const {
    Mat3 d;
    for (int j = 0; j < 3; ++j)
      d.col(j) = a * w[j] * power_p_dfactor(A.col(j).squaredNorm(), p, eps) * A.col(j);
    return d;
  }
};

struct FbarIsoP2 {
  Mat3 P;
  double rho(const Mat3& A, double a) const {
    const Mat3 B = P * A;
    return a * B.squaredNorm() + (A - B).squaredNorm();
  }
  Mat3 drho(const Mat3& A, double a) const {
    const Mat3 B = P * A;
    return 2.0 * a * B + 2.0 * (A - B);
  }
};

struct FbarIsoGen {
  Mat3 P;
  double p, eps;
  double rho(const Mat3& A, double a) const {
    const Mat3 B = P * A;
    return a * power_p(B.squaredNorm(), p, eps) +
           power_p((A - B).squaredNorm(), p, eps);
  }
  Mat3 drho(const Mat3& A, double a) const {
    const Mat3 B = P * A;
    const Mat3 N = A - B;
    return a * power_p_dfactor(B.squaredNorm(), p, eps) * B +
           power_p_dfactor(N.squaredNorm(), p, eps) * N;
  }
};

struct FbarColGen {
  Mat3 P;
  double p, eps;
  Vec3 w;
  double rho(const Mat3& A, double a) const {
    const Mat3 B = P * A;
    double v = 0.0;
    for (int j = 0; j < 3; ++j)
      v += w[j] * power_p(B.col(j).squaredNorm(), p, eps);
    return a * v + power_p((A - B).squaredNorm(), p, eps);
  }
  Mat3 drho(const Mat3& A, double a) const {
    const Mat3 B = P * A;
    const Mat3 N = A - B;
    Mat3 d = power_p_dfactor(N.squaredNorm(), p, eps) * N;
    for (int j = 0; j < 3; ++j)
      d.col(j) += a * w[j] * power_p_dfactor(B.col(j).squaredNorm(), p, eps) * B.col(j);
    return d;
  }
};

enum DensityTag {
  kIsoP2,
  kIsoGen,
  kColGen,
  kFbarIsoP2,
  kFbarIsoGen,
  kFbarColGen
};

}  // namespace

AssemblyPlan::AssemblyPlan(const Grid& grid, const SlabDomain& domain,
                           DensityParams density, Mat32 offset,
                           GradientScale scale, QuadratureRule quad,
                           std::vector<std::uint8_t> fixed_nodes)
    : grid_(grid), offset_(offset), density_(std::move(density)),
      fixed_(std::move(fixed_nodes)) {
  if (!(scale.s1 > 0.0) || !(scale.s2 > 0.0) || !(scale.s3 > 0.0))
    throw ScaleMismatch("gradient scale entries must be positive");
  density_.f.validate();
  if (quad.order != 1 && quad.order != 2)
    throw RangeError("quadrature order must be 1 or 2");

  normalization_ =
      domain.kind == SlabDomain::Kind::Cell ? 1.0 / domain.volume() : 1.0;

  const bool iso = density_.f.form == IntegrandForm::Isotropic;
  const bool p2 = density_.f.p == 2.0;
  if (density_.frame) {
    proj_ = density_.frame->proj;
    density_tag_ = iso ? (p2 ? kFbarIsoP2 : kFbarIsoGen) : kFbarColGen;
  } else {
    density_tag_ = iso ? (p2 ? kIsoP2 : kIsoGen) : kColGen;
  }

  const auto h = grid_.spacing();
  const double svals[3] = {scale.s1, scale.s2, scale.s3};

  // reference quadrature points per axis
  const int o = quad.order;
  quad_points_ = o * o * o;
  std::array<double, 2> q1;
  if (o == 1) {
    q1 = {0.0, 0.0};
  } else {
    q1 = {-1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)};
  }
  weight_ = normalization_ * h[0] * h[1] * h[2] / quad_points_;

  shape_grad_.resize(quad_points_);
  std::array<std::array<double, 3>, 8> qpos;
  for (int qk = 0; qk < o; ++qk)
    for (int qj = 0; qj < o; ++qj)
      for (int qi = 0; qi < o; ++qi) {
        const int q = (qk * o + qj) * o + qi;
        const double xi[3] = {q1[qi], q1[qj], q1[qk]};
        qpos[q] = {xi[0], xi[1], xi[2]};
        auto& G = shape_grad_[q];
        for (int a = 0; a < 8; ++a) {
          const int b[3] = {a & 1, (a >> 1) & 1, (a >> 2) & 1};
          double l[3], dl[3];
          for (int d = 0; d < 3; ++d) {
            l[d] = b[d] ? 0.5 * (1 + xi[d]) : 0.5 * (1 - xi[d]);
            dl[d] = b[d] ? 0.5 : -0.5;
          }
          G(0, a) = dl[0] * l[1] * l[2] * (2.0 / h[0]) * svals[0];
          G(1, a) = l[0] * dl[1] * l[2] * (2.0 / h[1]) * svals[1];
          G(2, a) = l[0] * l[1] * dl[2] * (2.0 / h[2]) * svals[2];
        }
      }

  // cached coefficient values at all quadrature points
  const auto& n = grid_.nodes;
  const std::int64_t ne = grid_.num_elements();
  coeff_.resize(ne * quad_points_);
  const double r = density_.coeff_rescale;
  for (int k = 0; k < n[2] - 1; ++k)
    for (int j = 0; j < n[1] - 1; ++j)
      for (int i = 0; i < n[0] - 1; ++i) {
        const std::int64_t e =
            (std::int64_t(k) * (n[1] - 1) + j) * (n[0] - 1) + i;
        const Vec3 x0 = grid_.node_position(i, j, k);
        for (int q = 0; q < quad_points_; ++q) {
          const Vec3 xq = x0 + Vec3(0.5 * h[0] * (1 + qpos[q][0]),
                                    0.5 * h[1] * (1 + qpos[q][1]),
                                    0.5 * h[2] * (1 + qpos[q][2]));
          coeff_[e * quad_points_ + q] =
              density_.f.coeff(Vec3(r * xq[0], r * xq[1], xq[2]));
        }
      }

  if (fixed_.empty()) fixed_.assign(grid_.num_nodes(), 0);

  // lumped nodal volumes -> residual weights
  residual_weight_.assign(grid_.num_nodes(), 0.0);
  const double ev8 = h[0] * h[1] * h[2] / 8.0;
  for (int k = 0; k < n[2]; ++k)
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i) {
        const int adj = ((i > 0 && i < n[0] - 1) ? 2 : 1) *
                        ((j > 0 && j < n[1] - 1) ? 2 : 1) *
                        ((k > 0 && k < n[2] - 1) ? 2 : 1);
        residual_weight_[grid_.node_index(i, j, k)] =
            1.0 / (normalization_ * adj * ev8);
      }

  node_offsets_ = {0,
                   1,
                   std::int64_t(n[0]),
                   std::int64_t(n[0]) + 1,
                   std::int64_t(n[0]) * n[1],
                   std::int64_t(n[0]) * n[1] + 1,
                   std::int64_t(n[0]) * n[1] + n[0],
                   std::int64_t(n[0]) * n[1] + n[0] + 1};

  for (int k = 0; k < n[2] - 1; ++k)
    for (int j = 0; j < n[1] - 1; ++j)
      for (int i = 0; i < n[0] - 1; ++i) {
        const std::int64_t e =
            (std::int64_t(k) * (n[1] - 1) + j) * (n[0] - 1) + i;
        colors_[(i & 1) | ((j & 1) << 1) | ((k & 1) << 2)].push_back(
            static_cast<std::int32_t>(e));
      }
}

namespace {

// Node base index of element e.
inline std::int64_t element_base(const std::array<int, 3>& n, std::int64_t e) {
  const int nex = n[0] - 1, ney = n[1] - 1;
  const int i = static_cast<int>(e % nex);
  const int j = static_cast<int>((e / nex) % ney);
  const int k = static_cast<int>(e / (std::int64_t(nex) * ney));
  return (std::int64_t(k) * n[1] + j) * n[0] + i;
}

}  // namespace

template <class Density, bool Parallel>
double AssemblyPlan::energy_impl(const std::vector<Vec3>& values) const {
  const Density den = [&] {
    if constexpr (std::is_same_v<Density, IsoP2>) return IsoP2{};
    else if constexpr (std::is_same_v<Density, IsoGen>)
      return IsoGen{density_.f.p, density_.epsilon};
    else if constexpr (std::is_same_v<Density, ColGen>)
      return ColGen{density_.f.p, density_.epsilon, density_.f.weights};
    else if constexpr (std::is_same_v<Density, FbarIsoP2>)
      return FbarIsoP2{proj_};
    else if constexpr (std::is_same_v<Density, FbarIsoGen>)
      return FbarIsoGen{proj_, density_.f.p, density_.epsilon};
    else
      return FbarColGen{proj_, density_.f.p, density_.epsilon, density_.f.weights};
  }();

  const std::int64_t ne = grid_.num_elements();
  const std::int64_t nchunks = par::num_chunks(ne);
  std::vector<double> partial(nchunks, 0.0);
  const int nq = quad_points_;
  const auto& n = grid_.nodes;

#pragma omp parallel for schedule(static) if (Parallel)
  for (std::int64_t c = 0; c < nchunks; ++c) {
    const std::int64_t e0 = c * par::kReductionChunk;
    const std::int64_t e1 = std::min(e0 + par::kReductionChunk, ne);
    double acc = 0.0;
    for (std::int64_t e = e0; e < e1; ++e) {
      const std::int64_t base = element_base(n, e);
      const double* aq = &coeff_[e * nq];
      Eigen::Matrix<double, 3, 8> u;
      for (int a = 0; a < 8; ++a) u.col(a) = values[base + node_offsets_[a]];
      for (int q = 0; q < nq; ++q) {
        Mat3 A = u * shape_grad_[q].transpose();
        A.col(0) += offset_.col(0);
        A.col(1) += offset_.col(1);
        acc += den.rho(A, aq[q]);
      }
    }
    partial[c] = acc;
  }
  double total = 0.0;
  for (double v : partial) total += v;
  return weight_ * total;
}

template <class Density, bool Parallel>
void AssemblyPlan::gradient_impl(const std::vector<Vec3>& values,
                                 std::vector<Vec3>& out) const {
  const Density den = [&] {
    if constexpr (std::is_same_v<Density, IsoP2>) return IsoP2{};
    else if constexpr (std::is_same_v<Density, IsoGen>)
      return IsoGen{density_.f.p, density_.epsilon};
    else if constexpr (std::is_same_v<Density, ColGen>)
      return ColGen{density_.f.p, density_.epsilon, density_.f.weights};
    else if constexpr (std::is_same_v<Density, FbarIsoP2>)
      return FbarIsoP2{proj_};
    else if constexpr (std::is_same_v<Density, FbarIsoGen>)
      return FbarIsoGen{proj_, density_.f.p, density_.epsilon};
    else
      return FbarColGen{proj_, density_.f.p, density_.epsilon, density_.f.weights};
  }();

  out.assign(grid_.num_nodes(), Vec3::Zero());
  const int nq = quad_points_;
  const auto& n = grid_.nodes;

  for (const auto& color : colors_) {
    const std::int64_t m = static_cast<std::int64_t>(color.size());
#pragma omp parallel for schedule(static) if (Parallel)
    for (std::int64_t ci = 0; ci < m; ++ci) {
      const std::int64_t e = color[ci];
      const std::int64_t base = element_base(n, e);
      const double* aq = &coeff_[e * nq];
      Eigen::Matrix<double, 3, 8> u;
      for (int a = 0; a < 8; ++a) u.col(a) = values[base + node_offsets_[a]];
      Eigen::Matrix<double, 3, 8> g = Eigen::Matrix<double, 3, 8>::Zero();
      for (int q = 0; q < nq; ++q) {
        Mat3 A = u * shape_grad_[q].transpose();
        A.col(0) += offset_.col(0);
        A.col(1) += offset_.col(1);
        g += den.drho(A, aq[q]) * shape_grad_[q];
      }
      for (int a = 0; a < 8; ++a) out[base + node_offsets_[a]] += weight_ * g.col(a);
    }
  }
  for (std::int64_t i = 0; i < grid_.num_nodes(); ++i)
    if (fixed_[i]) out[i].setZero();
}

#define THINHOM_DISPATCH(fn, ...)                                     \
  switch (density_tag_) {                                             \
    case kIsoP2: return fn<IsoP2, P>(__VA_ARGS__);                    \
    case kIsoGen: return fn<IsoGen, P>(__VA_ARGS__);                  \
    case kColGen: return fn<ColGen, P>(__VA_ARGS__);                  \
    case kFbarIsoP2: return fn<FbarIsoP2, P>(__VA_ARGS__);            \
    case kFbarIsoGen: return fn<FbarIsoGen, P>(__VA_ARGS__);          \
    default: return fn<FbarColGen, P>(__VA_ARGS__);                   \
  }

double AssemblyPlan::energy(const std::vector<Vec3>& values) const {
  constexpr bool P = true;
  THINHOM_DISPATCH(energy_impl, values)
}

double AssemblyPlan::energy_serial(const std::vector<Vec3>& values) const {
  constexpr bool P = false;
  THINHOM_DISPATCH(energy_impl, values)
}

void AssemblyPlan::gradient(const std::vector<Vec3>& values,
                            std::vector<Vec3>& out) const {
  constexpr bool P = true;
  THINHOM_DISPATCH(gradient_impl, values, out)
}

void AssemblyPlan::gradient_serial(const std::vector<Vec3>& values,
                                   std::vector<Vec3>& out) const {
  constexpr bool P = false;
  THINHOM_DISPATCH(gradient_impl, values, out)
}

#undef THINHOM_DISPATCH

double AssemblyPlan::normalized_residual(const std::vector<Vec3>& gradient) const {
  double worst = 0.0;
  for (std::int64_t i = 0; i < grid_.num_nodes(); ++i)
    worst = std::max(worst, gradient[i].norm() * residual_weight_[i]);
  return worst;
}

namespace {

std::vector<std::uint8_t> dirichlet_mask(const DiscreteField& field) {
  std::vector<std::uint8_t> mask(field.grid.num_nodes(), 0);
  if (std::holds_alternative<NoLateralBC>(field.lateral_bc)) return mask;
  const auto& n = field.grid.nodes;
  for (int k = 0; k < n[2]; ++k)
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i)
        if (field.grid.lateral_boundary(i, j))
          mask[field.grid.node_index(i, j, k)] = 1;
  return mask;
}

void check_density_compatibility(const DiscreteField& field,
                                 const DensityParams& density) {
  if (!density.frame && std::holds_alternative<FreeConstraint>(field.constraint))
    throw IncompatibleProblem(
        "raw density on an unconstrained field; use fbar (with a frame) or a "
        "tangent-subspace / manifold-valued field");
}

}  // namespace

AssemblyPlan make_plan(const DiscreteField& field, const DensityParams& density,
                       const std::optional<Mat32>& offset, GradientScale scale,
                       QuadratureRule quad) {
  return AssemblyPlan(field.grid, field.domain, density,
                      offset.value_or(Mat32::Zero()), scale, quad,
                      dirichlet_mask(field));
}

double assemble_energy(const DiscreteField& field, const DensityParams& density,
                       const std::optional<Mat32>& offset, GradientScale scale,
                       QuadratureRule quad, bool parallel) {
  check_density_compatibility(field, density);
  const AssemblyPlan plan = make_plan(field, density, offset, scale, quad);
  return parallel ? plan.energy(field.values) : plan.energy_serial(field.values);
}

std::vector<Vec3> assemble_gradient(const DiscreteField& field,
                                    const DensityParams& density,
                                    const std::optional<Mat32>& offset,
                                    GradientScale scale, QuadratureRule quad,
                                    bool parallel) {
  check_density_compatibility(field, density);
  const AssemblyPlan plan = make_plan(field, density, offset, scale, quad);
  std::vector<Vec3> g;
  if (parallel)
    plan.gradient(field.values, g);
  else
    plan.gradient_serial(field.values, g);
  // tangent-subspace fields report subspace-projected entries
  if (const auto* ts = std::get_if<TangentSubspace>(&field.constraint))
    for (Vec3& v : g) v = ts->frame.proj * v;
  return g;
}

}  // namespace thinhom
