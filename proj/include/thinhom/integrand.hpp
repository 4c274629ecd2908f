#pragma once

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <variant>
#include <vector>

#include "thinhom/geometry.hpp"

namespace thinhom {

/// Coefficient fields a(x) > 0, 1-periodic in (x1, x2), no periodicity in x3.
/// Lookups at piecewise-constant interfaces use half-open cells so values on
/// measure-zero sets are deterministic.
struct ConstantCoeff {
  double value = 1.0;
};

struct Laminate1D {
  double a1 = 1.0;
  double a2 = 1.0;
  double theta = 0.5;  // a = a1 on frac(x_axis) in [0, theta), a2 on [theta, 1)
  int axis = 1;        // 1 or 2
};

struct Checkerboard2D {
  double a1 = 1.0;  // on the two quadrants with frac(x1) < 1/2 == frac(x2) < 1/2
  double a2 = 1.0;
};

/// Periodic n1 x n2 x n3 array of positive values over Q' x (-1/2, 1/2),
/// row-major with x3 fastest. x3 lookups clamp (no periodicity across the
/// film faces).
struct GridSampled {
  std::array<int, 3> dims{1, 1, 1};
  std::vector<double> values{1.0};
};

class CoefficientField {
 public:
  using Kind = std::variant<ConstantCoeff, Laminate1D, Checkerboard2D, GridSampled>;

  explicit CoefficientField(Kind kind);

  static CoefficientField constant(double value);
  static CoefficientField laminate(double a1, double a2, double theta, int axis = 1);
  static CoefficientField checkerboard(double a1, double a2);
  static CoefficientField grid_sampled(std::array<int, 3> dims, std::vector<double> values);
  /// CSV ingestion: header line "n1,n2,n3", then positive values in row-major
  /// order (one or more per line).
  static CoefficientField from_csv(std::istream& in);

  double operator()(const Vec3& x) const;
  double min_value() const { return min_; }
  double max_value() const { return max_; }
  const Kind& kind() const { return kind_; }
  std::string name() const;

 private:
  Kind kind_;
  double min_ = 1.0;
  double max_ = 1.0;
};

enum class IntegrandForm { Isotropic, ColumnWeighted };

/// Caratheodory density f(x, xi) = a(x) * Phi(xi) with Phi either |xi|^p or
/// the columnwise sum w_j |xi_j|^p. Satisfies (H1) by construction and (H2)
/// with the constants returned by growth_constants.
struct IntegrandSpec {
  CoefficientField coeff = CoefficientField::constant(1.0);
  double p = 2.0;  // 1 < p < infinity
  IntegrandForm form = IntegrandForm::Isotropic;
  Vec3 weights = Vec3::Ones();  // ColumnWeighted only, all > 0

  void validate() const;
};

struct GrowthConstants {
  double alpha = 1.0;
  double beta = 1.0;
};

/// Certified (H2) constants: alpha = min(a)*min(w)*c_p, beta = max(a)*max(w)*C_p
/// with the l^p/l^2 column norm-equivalence factors (c_p = C_p = 1 for the
/// isotropic form and for p = 2).
GrowthConstants growth_constants(const IntegrandSpec& spec);

double eval_f(const IntegrandSpec& spec, const Vec3& x, const Mat3& xi);

/// Perturbed unconstrained density
///   fbar(x, s, xi) = f(x, P_s xi) + |xi - P_s xi|^p.
/// Agrees with f on tangent-valued matrices and is p-coercive with the
/// constant from fbar_growth_constant.
struct PerturbedIntegrand {
  IntegrandSpec base;
  ManifoldDescriptor manifold;
};

double eval_fbar(const PerturbedIntegrand& pert, const Vec3& x,
                 const TangentFrame& frame, const Mat3& xi);

/// C such that (1/C)|xi|^p <= fbar <= C(1+|xi|^p).
double fbar_growth_constant(const IntegrandSpec& spec);

/// Regularized p-power used by the discrete energies:
///   phi_eps(g) = (eps^2 + |g|^2)^{p/2} - eps^p,
/// which is exactly |g|^p for p = 2 (any eps) and for eps = 0.
/// `sq` is |g|^2. The derivative factor c in  d phi / d g = c * g.
double power_p(double sq, double p, double eps);
double power_p_dfactor(double sq, double p, double eps);

}  // namespace thinhom
