#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>
#include <variant>

#include "thinhom/errors.hpp"

namespace thinhom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

/// Embedded target manifolds with closed-form projections. All three are
/// smooth, boundaryless and connected; the affine plane is the unconstrained
/// oracle case.
struct Sphere {
  double radius = 1.0;  // centered at the origin
};

struct Torus {
  double major_radius = 2.0;
  double minor_radius = 1.0;  // requires minor < major (embedded)
};

struct AffinePlane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // stored normalized
};

class ManifoldDescriptor {
 public:
  using Kind = std::variant<Sphere, Torus, AffinePlane>;

  explicit ManifoldDescriptor(Kind kind);

  static ManifoldDescriptor sphere(double radius);
  static ManifoldDescriptor torus(double major_radius, double minor_radius);
  static ManifoldDescriptor plane(const Vec3& point, const Vec3& normal);

  const Kind& kind() const { return kind_; }
  int dim() const { return 2; }

  /// Residual of the defining equation at x (0 on the manifold).
  double equation_residual(const Vec3& x) const;
  bool contains(const Vec3& x, double tol = 1e-10) const {
    return equation_residual(x) <= tol;
  }

  /// "sphere" | "torus" | "plane", used in configs and reports.
  std::string name() const;

 private:
  Kind kind_;
};

/// Orthonormal tangent frame at a point s on M together with the orthogonal
/// projector P_s onto T_s(M).
struct TangentFrame {
  Vec3 point = Vec3::Zero();
  std::array<Vec3, 2> basis{Vec3::UnitX(), Vec3::UnitY()};
  Mat3 proj = Mat3::Identity();

  /// Tangent coordinates of an ambient vector.
  Eigen::Vector2d coords(const Vec3& v) const {
    return {basis[0].dot(v), basis[1].dot(v)};
  }
  Vec3 from_coords(const Eigen::Vector2d& c) const {
    return c[0] * basis[0] + c[1] * basis[1];
  }
};

/// Nearest-point projection Pi. Throws AmbiguousProjection at medial-axis
/// points; never picks a branch silently.
Vec3 nearest_point(const ManifoldDescriptor& m, const Vec3& x);

/// Frame at s in M (s validated against the defining equation, tol 1e-10).
TangentFrame tangent_frame(const ManifoldDescriptor& m, const Vec3& s);

/// Columnwise tangent projection: column j of the result is P_s (column j).
Mat3 matrix_tangent_projection(const TangentFrame& frame, const Mat3& xi);
Mat32 matrix_tangent_projection(const TangentFrame& frame, const Mat32& xi);

/// Directional derivative t -> d/dt [ P_{c(t)} v ] at t=0 along a curve c on M
/// with c(0)=s, c'(0)=ds. Used by the limit-energy gradient, where the
/// projector moves with the unknown field.
Vec3 projector_derivative(const ManifoldDescriptor& m, const Vec3& s,
                          const Vec3& v, const Vec3& ds);

/// Unit normal at s on M (any orientation; plane normal for AffinePlane).
Vec3 manifold_normal(const ManifoldDescriptor& m, const Vec3& s);

/// v minus its normal component at s.
inline Vec3 tangent_project(const ManifoldDescriptor& m, const Vec3& s, const Vec3& v) {
  const Vec3 n = manifold_normal(m, s);
  return v - n.dot(v) * n;
}

}  // namespace thinhom
