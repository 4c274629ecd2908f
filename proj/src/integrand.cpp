#include "thinhom/integrand.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <sstream>

namespace thinhom {

namespace {

double frac(double x) {
  double f = x - std::floor(x);
  return f < 1.0 ? f : 0.0;
}

int cell_index(double frac01, int n) {
  // half-open cells [k/n, (k+1)/n)
  const int k = static_cast<int>(frac01 * n);
  return std::min(k, n - 1);
}

}  // namespace

CoefficientField::CoefficientField(Kind kind) : kind_(std::move(kind)) {
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ConstantCoeff>) {
          if (!(k.value > 0.0)) throw RangeError("coefficient must be > 0");
          min_ = max_ = k.value;
        } else if constexpr (std::is_same_v<T, Laminate1D>) {
          if (!(k.a1 > 0.0) || !(k.a2 > 0.0))
            throw RangeError("laminate values must be > 0");
          if (!(k.theta > 0.0) || !(k.theta < 1.0))
            throw RangeError("laminate split fraction must lie in (0,1)");
          if (k.axis != 1 && k.axis != 2)
            throw RangeError("laminate axis must be 1 or 2");
          min_ = std::min(k.a1, k.a2);
          max_ = std::max(k.a1, k.a2);
        } else if constexpr (std::is_same_v<T, Checkerboard2D>) {
          if (!(k.a1 > 0.0) || !(k.a2 > 0.0))
            throw RangeError("checkerboard values must be > 0");
          min_ = std::min(k.a1, k.a2);
          max_ = std::max(k.a1, k.a2);
        } else {
          const auto [n1, n2, n3] = k.dims;
          if (n1 < 1 || n2 < 1 || n3 < 1)
            throw RangeError("grid-sampled coefficient needs positive dims");
          if (k.values.size() != static_cast<size_t>(n1) * n2 * n3)
            throw RangeError("grid-sampled coefficient: dims do not match value count");
          min_ = std::numeric_limits<double>::infinity();
          max_ = 0.0;
          for (double v : k.values) {
            if (!(v > 0.0)) throw RangeError("grid-sampled values must be > 0");
            min_ = std::min(min_, v);
            max_ = std::max(max_, v);
          }
        }
      },
      kind_);
}

CoefficientField CoefficientField::constant(double value) {
  return CoefficientField(ConstantCoeff{value});
}

CoefficientField CoefficientField::laminate(double a1, double a2, double theta, int axis) {
  return CoefficientField(Laminate1D{a1, a2, theta, axis});
}

CoefficientField CoefficientField::checkerboard(double a1, double a2) {
  return CoefficientField(Checkerboard2D{a1, a2});
}

CoefficientField CoefficientField::grid_sampled(std::array<int, 3> dims,
                                                std::vector<double> values) {
  return CoefficientField(GridSampled{dims, std::move(values)});
}

CoefficientField CoefficientField::from_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header))
    throw RangeError("grid-sampled CSV: missing header line \"n1,n2,n3\"");
  std::array<int, 3> dims{};
  {
    std::istringstream hs(header);
    std::string tok;
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(hs, tok, ',') )
        throw RangeError("grid-sampled CSV: header must be \"n1,n2,n3\"");
      dims[i] = std::stoi(tok);
    }
  }
  std::vector<double> vals;
  vals.reserve(static_cast<size_t>(dims[0]) * dims[1] * dims[2]);
  std::string line;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double v;
    while (ls >> v) vals.push_back(v);
  }
  return grid_sampled(dims, std::move(vals));
}

double CoefficientField::operator()(const Vec3& x) const {
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ConstantCoeff>) {
          return k.value;
        } else if constexpr (std::is_same_v<T, Laminate1D>) {
          return frac(x[k.axis - 1]) < k.theta ? k.a1 : k.a2;
        } else if constexpr (std::is_same_v<T, Checkerboard2D>) {
          const bool q1 = frac(x[0]) < 0.5;
          const bool q2 = frac(x[1]) < 0.5;
          return q1 == q2 ? k.a1 : k.a2;
        } else {
          const auto [n1, n2, n3] = k.dims;
          const int i1 = cell_index(frac(x[0]), n1);
          const int i2 = cell_index(frac(x[1]), n2);
          const double t3 = std::clamp(x[2] + 0.5, 0.0, 1.0);
          const int i3 = cell_index(std::min(t3, std::nextafter(1.0, 0.0)), n3);
          return k.values[(static_cast<size_t>(i1) * n2 + i2) * n3 + i3];
        }
      },
      kind_);
}

std::string CoefficientField::name() const {
  return std::visit(
      [](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ConstantCoeff>) return "constant";
        else if constexpr (std::is_same_v<T, Laminate1D>) return "laminate";
        else if constexpr (std::is_same_v<T, Checkerboard2D>) return "checkerboard";
        else return "grid";
      },
      kind_);
}

void IntegrandSpec::validate() const {
  if (!(p > 1.0) || !std::isfinite(p))
    throw RangeError("growth exponent must satisfy 1 < p < infinity");
  if (form == IntegrandForm::ColumnWeighted)
    for (int j = 0; j < 3; ++j)
      if (!(weights[j] > 0.0)) throw RangeError("column weights must be > 0");
}

GrowthConstants growth_constants(const IntegrandSpec& spec) {
  spec.validate();
  if (spec.form == IntegrandForm::Isotropic)
    return {spec.coeff.min_value(), spec.coeff.max_value()};
  // l^p vs l^2 norm equivalence on the three column norms
  const double e = std::pow(3.0, 1.0 - spec.p / 2.0);
  const double cp = std::min(1.0, e);
  const double Cp = std::max(1.0, e);
  const double wmin = spec.weights.minCoeff();
  const double wmax = spec.weights.maxCoeff();
  return {spec.coeff.min_value() * wmin * cp, spec.coeff.max_value() * wmax * Cp};
}

double power_p(double sq, double p, double eps) {
  if (p == 2.0) return sq;
  if (eps == 0.0) return std::pow(sq, 0.5 * p);
  return std::pow(eps * eps + sq, 0.5 * p) - std::pow(eps, p);
}

double power_p_dfactor(double sq, double p, double eps) {
  if (p == 2.0) return 2.0;
  if (eps == 0.0) {
    if (sq == 0.0) {
      if (p < 2.0)
        throw NonSmoothPoint("gradient of |g|^p at g = 0 with p < 2 and eps = 0");
      return 0.0;
    }
    return p * std::pow(sq, 0.5 * p - 1.0);
  }
  return p * std::pow(eps * eps + sq, 0.5 * p - 1.0);
}

namespace {

double shape_value(const IntegrandSpec& spec, const Mat3& xi) {
  if (spec.form == IntegrandForm::Isotropic)
    return power_p(xi.squaredNorm(), spec.p, 0.0);
  double v = 0.0;
  for (int j = 0; j < 3; ++j)
    v += spec.weights[j] * power_p(xi.col(j).squaredNorm(), spec.p, 0.0);
  return v;
}

}  // namespace

double eval_f(const IntegrandSpec& spec, const Vec3& x, const Mat3& xi) {
  return spec.coeff(x) * shape_value(spec, xi);
}

double eval_fbar(const PerturbedIntegrand& pert, const Vec3& x,
                 const TangentFrame& frame, const Mat3& xi) {
  const Mat3 tang = matrix_tangent_projection(frame, xi);
  const Mat3 normal = xi - tang;
  return eval_f(pert.base, x, tang) + power_p(normal.squaredNorm(), pert.base.p, 0.0);
}

double fbar_growth_constant(const IntegrandSpec& spec) {
  const auto [alpha, beta] = growth_constants(spec);
  return std::max({beta, 1.0 / alpha, 1.0}) * std::pow(2.0, spec.p);
}

}  // namespace thinhom
