#include "thinhom/geometry.hpp"

#include <cmath>

namespace thinhom {

namespace {

constexpr double kMedialTol = 1e-14;

// In-plane radius and the torus tube center for points off the z-axis.
double ring_radius(const Vec3& x) { return std::hypot(x[0], x[1]); }

Vec3 tube_center(const Torus& t, const Vec3& x) {
  const double rho = ring_radius(x);
  return Vec3(t.major_radius * x[0] / rho, t.major_radius * x[1] / rho, 0.0);
}

// Deterministic orthonormal basis of the plane orthogonal to unit n.
std::array<Vec3, 2> orthonormal_complement(const Vec3& n) {
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(n[i]) < std::abs(n[k])) k = i;
  Vec3 b0 = Vec3::Unit(k) - n[k] * n;
  b0.normalize();
  const Vec3 b1 = n.cross(b0);
  return {b0, b1};
}

TangentFrame frame_from_normal(const Vec3& s, const Vec3& n) {
  TangentFrame f;
  f.point = s;
  f.basis = orthonormal_complement(n);
  f.proj = Mat3::Identity() - n * n.transpose();
  return f;
}

}  // namespace

ManifoldDescriptor::ManifoldDescriptor(Kind kind) : kind_(std::move(kind)) {
  std::visit(
      [](auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          if (!(k.radius > 0.0)) throw RangeError("sphere radius must be > 0");
        } else if constexpr (std::is_same_v<T, Torus>) {
          if (!(k.minor_radius > 0.0) || !(k.minor_radius < k.major_radius))
            throw RangeError("torus requires 0 < minor_radius < major_radius");
        } else {
          const double len = k.normal.norm();
          if (!(len > 0.0)) throw RangeError("plane normal must be nonzero");
          k.normal /= len;
        }
      },
      kind_);
}

ManifoldDescriptor ManifoldDescriptor::sphere(double radius) {
  return ManifoldDescriptor(Sphere{radius});
}

ManifoldDescriptor ManifoldDescriptor::torus(double major_radius,
                                             double minor_radius) {
  return ManifoldDescriptor(Torus{major_radius, minor_radius});
}

ManifoldDescriptor ManifoldDescriptor::plane(const Vec3& point,
                                             const Vec3& normal) {
  return ManifoldDescriptor(AffinePlane{point, normal});
}

double ManifoldDescriptor::equation_residual(const Vec3& x) const {
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return std::abs(x.norm() - k.radius);
        } else if constexpr (std::is_same_v<T, Torus>) {
          const double d = std::hypot(ring_radius(x) - k.major_radius, x[2]);
          return std::abs(d - k.minor_radius);
        } else {
          return std::abs((x - k.point).dot(k.normal));
        }
      },
      kind_);
}

std::string ManifoldDescriptor::name() const {
  return std::visit(
      [](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Sphere>) return "sphere";
        else if constexpr (std::is_same_v<T, Torus>) return "torus";
        else return "plane";
      },
      kind_);
}

Vec3 nearest_point(const ManifoldDescriptor& m, const Vec3& x) {
  return std::visit(
      [&](const auto& k) -> Vec3 {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          const double len = x.norm();
          if (len <= kMedialTol)
            throw AmbiguousProjection("sphere projection at the center");
          return (k.radius / len) * x;
        } else if constexpr (std::is_same_v<T, Torus>) {
          if (ring_radius(x) <= kMedialTol)
            throw AmbiguousProjection("torus projection on the symmetry axis");
          const Vec3 c = tube_center(k, x);
          const Vec3 d = x - c;
          const double len = d.norm();
          if (len <= kMedialTol)
            throw AmbiguousProjection("torus projection on the major circle");
          return c + (k.minor_radius / len) * d;
        } else {
          return x - (x - k.point).dot(k.normal) * k.normal;
        }
      },
      m.kind());
}

TangentFrame tangent_frame(const ManifoldDescriptor& m, const Vec3& s) {
  if (!m.contains(s, 1e-10))
    throw NotOnManifold("tangent_frame: point violates the defining equation, residual = " +
                        std::to_string(m.equation_residual(s)));
  return std::visit(
      [&](const auto& k) -> TangentFrame {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return frame_from_normal(s, s.normalized());
        } else if constexpr (std::is_same_v<T, Torus>) {
          const Vec3 n = (s - tube_center(k, s)).normalized();
          return frame_from_normal(s, n);
        } else {
          return frame_from_normal(s, k.normal);
        }
      },
      m.kind());
}

Mat3 matrix_tangent_projection(const TangentFrame& frame, const Mat3& xi) {
  return frame.proj * xi;
}

Mat32 matrix_tangent_projection(const TangentFrame& frame, const Mat32& xi) {
  return frame.proj * xi;
}

Vec3 manifold_normal(const ManifoldDescriptor& m, const Vec3& s) {
  return std::visit(
      [&](const auto& k) -> Vec3 {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return s.normalized();
        } else if constexpr (std::is_same_v<T, Torus>) {
          return (s - tube_center(k, s)).normalized();
        } else {
          return k.normal;
        }
      },
      m.kind());
}

Vec3 projector_derivative(const ManifoldDescriptor& m, const Vec3& s,
                          const Vec3& v, const Vec3& ds) {
  return std::visit(
      [&](const auto& k) -> Vec3 {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, AffinePlane>) {
          return Vec3::Zero();
        } else if constexpr (std::is_same_v<T, Sphere>) {
          const Vec3 n = s / k.radius;
          const Vec3 dn = ds / k.radius;
          return -(dn * n.dot(v) + n * dn.dot(v));
        } else {
          const Vec3 n = (s - tube_center(k, s)) / k.minor_radius;
          const double rho = ring_radius(s);
          const Vec3 splane(s[0], s[1], 0.0);
          const Vec3 dsplane(ds[0], ds[1], 0.0);
          const Vec3 dc = (k.major_radius / rho) *
                          (dsplane - splane * (splane.dot(dsplane) / (rho * rho)));
          const Vec3 dn = (ds - dc) / k.minor_radius;
          return -(dn * n.dot(v) + n * dn.dot(v));
        }
      },
      m.kind());
}

}  // namespace thinhom
