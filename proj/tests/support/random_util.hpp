#pragma once

#include <random>

#include "thinhom/geometry.hpp"

namespace testutil {

using thinhom::Mat3;
using thinhom::Mat32;
using thinhom::Vec3;

inline Vec3 random_vec3(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

inline Mat3 random_mat3(std::mt19937_64& rng, double scale = 1.0) {
  Mat3 m;
  std::uniform_real_distribution<double> u(-scale, scale);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = u(rng);
  return m;
}

inline Vec3 random_point_on(const thinhom::ManifoldDescriptor& m,
                            std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return std::visit(
      [&](const auto& k) -> Vec3 {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, thinhom::Sphere>) {
          Vec3 v;
          do {
            v = {u(rng), u(rng), u(rng)};
          } while (v.norm() < 1e-3);
          return k.radius * v.normalized();
        } else if constexpr (std::is_same_v<T, thinhom::Torus>) {
          std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
          const double ph = ang(rng), th = ang(rng);
          const double rho = k.major_radius + k.minor_radius * std::cos(th);
          return {rho * std::cos(ph), rho * std::sin(ph),
                  k.minor_radius * std::sin(th)};
        } else {
          const Vec3 v{u(rng), u(rng), u(rng)};
          return v - (v - k.point).dot(k.normal) * k.normal;
        }
      },
      m.kind());
}

// random matrix with columns in T_s(M)
inline Mat32 random_tangent_mat32(const thinhom::TangentFrame& frame,
                                  std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat32 xi;
  for (int j = 0; j < 2; ++j)
    xi.col(j) = u(rng) * frame.basis[0] + u(rng) * frame.basis[1];
  return xi;
}

}  // namespace testutil
