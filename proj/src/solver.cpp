#include "thinhom/solver.hpp"

#include <cmath>

namespace thinhom {

namespace {

constexpr double kStepFloor = 1e-16;
constexpr double kBBMin = 1e-12;
constexpr double kBBMax = 1e12;

double dot(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i].dot(b[i]);
  return s;
}

}  // namespace

SolveStats minimize_on_subspace(const AssemblyPlan& plan,
                                const std::optional<TangentFrame>& frame,
                                std::vector<Vec3>& values,
                                const SolverSettings& settings) {
  const auto& fixed = plan.fixed();
  const size_t n = values.size();

  // project an ambient gradient onto the per-node free subspace
  const auto project = [&](std::vector<Vec3>& g) {
    if (frame)
      for (size_t i = 0; i < n; ++i) g[i] = frame->proj * g[i];
    for (size_t i = 0; i < n; ++i)
      if (fixed[i]) g[i].setZero();
  };

  SolveStats stats;
  std::vector<Vec3> g(n), g_new(n), trial(n);

  double energy = plan.energy(values);
  plan.gradient(values, g);
  project(g);
  double res = plan.normalized_residual(g);
  if (settings.keep_log) stats.log.push_back({0, energy, res});

  const double g0 = std::sqrt(dot(g, g));
  double tau_trial = g0 > 0.0 ? 1.0 / g0 : 1.0;
  double tau_bb = tau_trial;

  int it = 0;
  for (; it < settings.max_iterations && res > settings.tolerance; ++it) {
    const double gg = dot(g, g);
    if (gg == 0.0) break;

    double tau = settings.step_rule == "fixed" ? tau_trial : tau_bb;
    bool accepted = false;
    double energy_new = energy;
    while (tau > kStepFloor) {
      for (size_t i = 0; i < n; ++i) trial[i] = values[i] - tau * g[i];
      energy_new = plan.energy(trial);
      if (energy_new <= energy - settings.armijo_c * tau * gg) {
        accepted = true;
        break;
      }
      tau *= 0.5;
    }
    if (!accepted) break;  // line search floored out: return best so far

    plan.gradient(trial, g_new);
    project(g_new);

    // BB1 step from (s, y); fall back to the accepted step when <s,y> <= 0
    double sy = 0.0, ss = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const Vec3 s = trial[i] - values[i];
      ss += s.squaredNorm();
      sy += s.dot(g_new[i] - g[i]);
    }
    tau_bb = sy > 0.0 ? std::clamp(ss / sy, kBBMin, kBBMax) : tau;

    values.swap(trial);
    g.swap(g_new);
    energy = energy_new;
    res = plan.normalized_residual(g);
    if (settings.keep_log) stats.log.push_back({it + 1, energy, res});
  }

  stats.energy = energy;
  stats.residual = res;
  stats.iterations = it;
  stats.converged = res <= settings.tolerance;
  return stats;
}

SolveStats minimize_on_manifold(const AssemblyPlan& plan,
                                const ManifoldDescriptor& manifold,
                                std::vector<Vec3>& values,
                                const SolverSettings& settings) {
  const auto& fixed = plan.fixed();
  const size_t n = values.size();

  const auto project = [&](const std::vector<Vec3>& u, std::vector<Vec3>& g) {
    for (size_t i = 0; i < n; ++i) {
      if (fixed[i]) {
        g[i].setZero();
        continue;
      }
      const Vec3 nrm = manifold_normal(manifold, u[i]);
      g[i] -= nrm.dot(g[i]) * nrm;
    }
  };

  // retraction: nearest-point projection of every free node; reports failure
  // (medial-axis hit) instead of throwing so the step can be halved
  const auto retract = [&](const std::vector<Vec3>& u, const std::vector<Vec3>& d,
                           double tau, std::vector<Vec3>& out) -> bool {
    for (size_t i = 0; i < n; ++i) {
      if (fixed[i]) {
        out[i] = u[i];
        continue;
      }
      try {
        out[i] = nearest_point(manifold, u[i] - tau * d[i]);
      } catch (const AmbiguousProjection&) {
        return false;
      }
    }
    return true;
  };

  SolveStats stats;
  std::vector<Vec3> g(n), g_new(n), trial(n);

  double energy = plan.energy(values);
  plan.gradient(values, g);
  project(values, g);
  double res = plan.normalized_residual(g);
  if (settings.keep_log) stats.log.push_back({0, energy, res});

  const double g0 = std::sqrt(dot(g, g));
  double tau_trial = g0 > 0.0 ? 1.0 / g0 : 1.0;
  double tau_bb = tau_trial;

  int it = 0;
  for (; it < settings.max_iterations && res > settings.tolerance; ++it) {
    const double gg = dot(g, g);
    if (gg == 0.0) break;

    double tau = settings.step_rule == "fixed" ? tau_trial : tau_bb;
    bool accepted = false;
    bool projection_failed = false;
    double energy_new = energy;
    while (tau > kStepFloor) {
      if (!retract(values, g, tau, trial)) {
        projection_failed = true;  // left the neighborhood: reject and halve
        tau *= 0.5;
        continue;
      }
      energy_new = plan.energy(trial);
      if (energy_new <= energy - settings.armijo_c * tau * gg) {
        accepted = true;
        break;
      }
      tau *= 0.5;
    }
    if (!accepted) {
      if (projection_failed)
        throw AmbiguousProjection(
            "manifold descent: projection kept failing until step halving floored out");
      break;  // plain line-search stagnation: return best so far
    }

    plan.gradient(trial, g_new);
    project(trial, g_new);

    double sy = 0.0, ss = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const Vec3 s = trial[i] - values[i];
      ss += s.squaredNorm();
      sy += s.dot(g_new[i] - g[i]);
    }
    tau_bb = sy > 0.0 ? std::clamp(ss / sy, kBBMin, kBBMax) : tau;

    values.swap(trial);
    g.swap(g_new);
    energy = energy_new;
    res = plan.normalized_residual(g);
    if (settings.keep_log) stats.log.push_back({it + 1, energy, res});
  }

  stats.energy = energy;
  stats.residual = res;
  stats.iterations = it;
  stats.converged = res <= settings.tolerance;
  return stats;
}

}  // namespace thinhom
