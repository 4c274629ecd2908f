#include "thinhom/film.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace thinhom {

namespace {

constexpr double kBcTol = 1e-10;

std::vector<std::uint8_t> lateral_mask(const Grid& grid) {
  std::vector<std::uint8_t> mask(grid.num_nodes(), 0);
  const auto& n = grid.nodes;
  for (int k = 0; k < n[2]; ++k)
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i)
        if (grid.lateral_boundary(i, j)) mask[grid.node_index(i, j, k)] = 1;
  return mask;
}

double wrap(double v, double period) {
  return v - period * std::floor(v / period);
}

// Radial C^1 cut-off: 1 on |X| <= delta/4, 0 on |X| >= delta/2, cubic
// smoothstep in between (|grad zeta| <= 6/delta).
double cutoff(double r, double delta) {
  const double r0 = 0.25 * delta, r1 = 0.5 * delta;
  if (r <= r0) return 1.0;
  if (r >= r1) return 0.0;
  const double tau = (r - r0) / (r1 - r0);
  return 1.0 - tau * tau * (3.0 - 2.0 * tau);
}

void check_tubular_radius(const ManifoldDescriptor& m, double delta) {
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          if (!(2.0 * delta < k.radius))
            throw PreconditionViolated(
                "recovery cut-off: B(s0, 2 delta) exceeds the sphere's projection neighborhood");
        } else if constexpr (std::is_same_v<T, Torus>) {
          if (!(2.0 * delta < k.minor_radius))
            throw PreconditionViolated(
                "recovery cut-off: B(s0, 2 delta) exceeds the torus tube radius");
        }
      },
      m.kind());
}

}  // namespace

Vec3 FilmProblem::datum(double x1, double x2) const {
  return nearest_point(manifold, s0 + xi0 * Eigen::Vector2d(x1, x2));
}

DiscreteField film_datum_extension(const FilmProblem& problem) {
  DiscreteField f;
  f.grid.nodes = problem.grid;
  f.grid.length = {problem.omega[0], problem.omega[1], 1.0};
  f.domain = SlabDomain::film(problem.omega);
  f.constraint = ManifoldValued{problem.manifold};
  f.lateral_bc = NoLateralBC{};
  f.values.resize(f.grid.num_nodes());
  for (int k = 0; k < problem.grid[2]; ++k)
    for (int j = 0; j < problem.grid[1]; ++j)
      for (int i = 0; i < problem.grid[0]; ++i) {
        const Vec3 x = f.grid.node_position(i, j, k);
        f.at(i, j, k) = problem.datum(x[0], x[1]);
      }
  return f;
}

namespace {

double max_datum_violation(const DiscreteField& u, const FilmProblem& problem) {
  double worst = 0.0;
  const auto& n = u.grid.nodes;
  for (int k = 0; k < n[2]; ++k)
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i) {
        if (!u.grid.lateral_boundary(i, j)) continue;
        const Vec3 x = u.grid.node_position(i, j, k);
        worst = std::max(worst, (u.at(i, j, k) - problem.datum(x[0], x[1])).norm());
      }
  return worst;
}

AssemblyPlan film_plan(const DiscreteField& u, const FilmProblem& problem) {
  DensityParams density{problem.integrand, std::nullopt, 1.0 / problem.h,
                        problem.epsilon};
  return AssemblyPlan(u.grid, u.domain, density, Mat32::Zero(),
                      GradientScale{1.0, 1.0, 1.0 / problem.h}, problem.quad,
                      lateral_mask(u.grid));
}

}  // namespace

double eval_film_energy(const DiscreteField& u, const FilmProblem& problem,
                        bool check_bc) {
  if (check_bc) {
    const double viol = max_datum_violation(u, problem);
    if (viol > kBcTol)
      throw BCViolation("film field violates the lateral datum by " +
                        std::to_string(viol));
  }
  return film_plan(u, problem).energy(u.values);
}

std::pair<DiscreteField, SolveStats> minimize_film(const FilmProblem& problem,
                                                   const DiscreteField* start) {
  DiscreteField u = start ? *start : film_datum_extension(problem);
  const double viol = max_datum_violation(u, problem);
  if (viol > kBcTol)
    throw BCViolation("film start violates the lateral datum by " +
                      std::to_string(viol));
  const AssemblyPlan plan = film_plan(u, problem);
  SolveStats stats = minimize_on_manifold(plan, problem.manifold, u.values,
                                          problem.solver);
  return {std::move(u), std::move(stats)};
}

Vec3 PlanarField::sample(const Eigen::Vector2d& x) const {
  const double hx = omega[0] / (nodes[0] - 1), hy = omega[1] / (nodes[1] - 1);
  double u = (x[0] + 0.5 * omega[0]) / hx;
  double v = (x[1] + 0.5 * omega[1]) / hy;
  int i = std::clamp(static_cast<int>(std::floor(u)), 0, nodes[0] - 2);
  int j = std::clamp(static_cast<int>(std::floor(v)), 0, nodes[1] - 2);
  const double a = std::clamp(u - i, 0.0, 1.0), b = std::clamp(v - j, 0.0, 1.0);
  return (1 - a) * (1 - b) * values[node_index(i, j)] +
         a * (1 - b) * values[node_index(i + 1, j)] +
         (1 - a) * b * values[node_index(i, j + 1)] +
         a * b * values[node_index(i + 1, j + 1)];
}

PlanarField planar_datum(const ManifoldDescriptor& manifold, const Vec3& s0,
                         const Mat32& xi0, std::array<int, 2> nodes,
                         std::array<double, 2> omega) {
  PlanarField u;
  u.nodes = nodes;
  u.omega = omega;
  u.manifold = manifold;
  u.values.resize(u.num_nodes());
  for (int j = 0; j < nodes[1]; ++j)
    for (int i = 0; i < nodes[0]; ++i) {
      const Eigen::Vector2d x = u.node_position(i, j);
      u.values[u.node_index(i, j)] = nearest_point(manifold, s0 + xi0 * x);
    }
  return u;
}

namespace {

struct PlanarQuad {
  // 2x2 Gauss data for one bilinear element, shared by energy and gradient.
  std::array<std::array<double, 4>, 4> N;        // [qp][node]
  std::array<std::array<Eigen::Vector2d, 4>, 4> dN;
  double w = 0.0;

  PlanarQuad(double hx, double hy) {
    const double g = 1.0 / std::sqrt(3.0);
    const double q1[2] = {-g, g};
    for (int qj = 0; qj < 2; ++qj)
      for (int qi = 0; qi < 2; ++qi) {
        const int q = qj * 2 + qi;
        const double xi = q1[qi], eta = q1[qj];
        for (int a = 0; a < 4; ++a) {
          const int bi = a & 1, bj = (a >> 1) & 1;
          const double lx = bi ? 0.5 * (1 + xi) : 0.5 * (1 - xi);
          const double ly = bj ? 0.5 * (1 + eta) : 0.5 * (1 - eta);
          const double dlx = bi ? 0.5 : -0.5;
          const double dly = bj ? 0.5 : -0.5;
          N[q][a] = lx * ly;
          dN[q][a] = {dlx * ly * 2.0 / hx, lx * dly * 2.0 / hy};
        }
      }
    w = hx * hy / 4.0;
  }
};

}  // namespace

double eval_limit_energy(const PlanarField& u, const DensityTable& table,
                         LimitEnergyDiagnostics* diag) {
  const double hx = u.omega[0] / (u.nodes[0] - 1);
  const double hy = u.omega[1] / (u.nodes[1] - 1);
  const PlanarQuad quad(hx, hy);
  int clamped = 0;
  double drift = 0.0;
  double energy = 0.0;
  for (int j = 0; j + 1 < u.nodes[1]; ++j)
    for (int i = 0; i + 1 < u.nodes[0]; ++i) {
      const std::array<std::int64_t, 4> nd{u.node_index(i, j), u.node_index(i + 1, j),
                                           u.node_index(i, j + 1),
                                           u.node_index(i + 1, j + 1)};
      for (int q = 0; q < 4; ++q) {
        Vec3 uq = Vec3::Zero();
        Mat32 D = Mat32::Zero();
        for (int a = 0; a < 4; ++a) {
          uq += quad.N[q][a] * u.values[nd[a]];
          D.col(0) += quad.dN[q][a][0] * u.values[nd[a]];
          D.col(1) += quad.dN[q][a][1] * u.values[nd[a]];
        }
        const Vec3 s = nearest_point(u.manifold, uq);
        const Vec3 nrm = manifold_normal(u.manifold, s);
        Mat32 Dp = D;
        for (int c = 0; c < 2; ++c) Dp.col(c) -= nrm.dot(D.col(c)) * nrm;
        drift = std::max(drift, (D - Dp).norm());
        energy += quad.w * table.query(s, Dp, &clamped);
      }
    }
  if (diag) {
    diag->out_of_range = clamped;
    diag->max_drift = drift;
  }
  return energy;
}

namespace {

// Energy and nodal gradient of the table-based limit functional. The gradient
// follows both dependence paths: the in-plane gradient of u and the movement
// of the tangent projector with u.
double limit_energy_grad(const PlanarField& u, const DensityTable& table,
                         std::vector<Vec3>& grad) {
  const double hx = u.omega[0] / (u.nodes[0] - 1);
  const double hy = u.omega[1] / (u.nodes[1] - 1);
  const PlanarQuad quad(hx, hy);
  grad.assign(u.num_nodes(), Vec3::Zero());
  double energy = 0.0;
  for (int j = 0; j + 1 < u.nodes[1]; ++j)
    for (int i = 0; i + 1 < u.nodes[0]; ++i) {
      const std::array<std::int64_t, 4> nd{u.node_index(i, j), u.node_index(i + 1, j),
                                           u.node_index(i, j + 1),
                                           u.node_index(i + 1, j + 1)};
      for (int q = 0; q < 4; ++q) {
        Vec3 uq = Vec3::Zero();
        Mat32 D = Mat32::Zero();
        for (int a = 0; a < 4; ++a) {
          uq += quad.N[q][a] * u.values[nd[a]];
          D.col(0) += quad.dN[q][a][0] * u.values[nd[a]];
          D.col(1) += quad.dN[q][a][1] * u.values[nd[a]];
        }
        const Vec3 s = nearest_point(u.manifold, uq);
        const Vec3 nrm = manifold_normal(u.manifold, s);
        const Mat3 P = Mat3::Identity() - nrm * nrm.transpose();
        Mat32 Dp = D;
        for (int c = 0; c < 2; ++c) Dp.col(c) -= nrm.dot(D.col(c)) * nrm;

        const int k = table.nearest_base(s);
        std::array<double, 4> dc;
        const double val = table.query_coords_grad(k, table.coords_of(k, Dp), dc);
        energy += quad.w * val;

        const std::array<Vec3, 2> Pb{P * table.frames[k].basis[0],
                                     P * table.frames[k].basis[1]};
        for (int a = 0; a < 4; ++a) {
          for (int r = 0; r < 3; ++r) {
            double acc = 0.0;
            // path through grad u
            for (int bi = 0; bi < 2; ++bi)
              for (int cj = 0; cj < 2; ++cj)
                acc += dc[2 * bi + cj] * Pb[bi][r] * quad.dN[q][a][cj];
            // path through the moving projector, ds = P du to first order
            const Vec3 ds = quad.N[q][a] * P.col(r);
            for (int cj = 0; cj < 2; ++cj) {
              const Vec3 dPD = projector_derivative(u.manifold, s, D.col(cj), ds);
              for (int bi = 0; bi < 2; ++bi)
                acc += dc[2 * bi + cj] * table.frames[k].basis[bi].dot(dPD);
            }
            grad[nd[a]][r] += quad.w * acc;
          }
        }
      }
    }
  return energy;
}

}  // namespace

std::pair<PlanarField, SolveStats> minimize_limit(
    const DensityTable& table, const ManifoldDescriptor& manifold,
    const Vec3& s0, const Mat32& xi0, std::array<int, 2> nodes,
    std::array<double, 2> omega, const SolverSettings& settings) {
  PlanarField u = planar_datum(manifold, s0, xi0, nodes, omega);
  const std::int64_t nn = u.num_nodes();
  std::vector<std::uint8_t> fixed(nn, 0);
  for (int j = 0; j < nodes[1]; ++j)
    for (int i = 0; i < nodes[0]; ++i)
      if (u.boundary(i, j)) fixed[u.node_index(i, j)] = 1;

  const double hx = omega[0] / (nodes[0] - 1), hy = omega[1] / (nodes[1] - 1);
  std::vector<double> rw(nn);
  for (int j = 0; j < nodes[1]; ++j)
    for (int i = 0; i < nodes[0]; ++i) {
      const int adj = ((i > 0 && i < nodes[0] - 1) ? 2 : 1) *
                      ((j > 0 && j < nodes[1] - 1) ? 2 : 1);
      rw[u.node_index(i, j)] = 4.0 / (adj * hx * hy);
    }

  const auto project = [&](const std::vector<Vec3>& vals, std::vector<Vec3>& g) {
    for (std::int64_t idx = 0; idx < nn; ++idx) {
      if (fixed[idx]) {
        g[idx].setZero();
        continue;
      }
      g[idx] = tangent_project(manifold, vals[idx], g[idx]);
    }
  };
  const auto residual = [&](const std::vector<Vec3>& g) {
    double worst = 0.0;
    for (std::int64_t idx = 0; idx < nn; ++idx)
      worst = std::max(worst, g[idx].norm() * rw[idx]);
    return worst;
  };

  SolveStats stats;
  std::vector<Vec3> g(nn), g_new(nn), trial(nn);
  double energy = limit_energy_grad(u, table, g);
  project(u.values, g);
  double res = residual(g);
  if (settings.keep_log) stats.log.push_back({0, energy, res});

  const double g0 = std::sqrt(std::inner_product(
      g.begin(), g.end(), g.begin(), 0.0,
      [](double a, double b) { return a + b; },
      [](const Vec3& a, const Vec3& b) { return a.dot(b); }));
  double tau_bb = g0 > 0.0 ? 1.0 / g0 : 1.0;

  PlanarField u_trial = u;
  int it = 0;
  for (; it < settings.max_iterations && res > settings.tolerance; ++it) {
    double gg = 0.0;
    for (std::int64_t idx = 0; idx < nn; ++idx) gg += g[idx].squaredNorm();
    if (gg == 0.0) break;

    double tau = tau_bb;
    bool accepted = false;
    double energy_new = energy;
    while (tau > 1e-16) {
      bool ok = true;
      for (std::int64_t idx = 0; idx < nn && ok; ++idx) {
        if (fixed[idx]) {
          u_trial.values[idx] = u.values[idx];
          continue;
        }
        try {
          u_trial.values[idx] =
              nearest_point(manifold, u.values[idx] - tau * g[idx]);
        } catch (const AmbiguousProjection&) {
          ok = false;
        }
      }
      if (ok) {
        energy_new = eval_limit_energy(u_trial, table);
        if (energy_new <= energy - settings.armijo_c * tau * gg) {
          accepted = true;
          break;
        }
      }
      tau *= 0.5;
    }
    if (!accepted) break;

    energy_new = limit_energy_grad(u_trial, table, g_new);
    project(u_trial.values, g_new);

    double sy = 0.0, ss = 0.0;
    for (std::int64_t idx = 0; idx < nn; ++idx) {
      const Vec3 sv = u_trial.values[idx] - u.values[idx];
      ss += sv.squaredNorm();
      sy += sv.dot(g_new[idx] - g[idx]);
    }
    tau_bb = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e12) : tau;

    u.values.swap(u_trial.values);
    g.swap(g_new);
    energy = energy_new;
    res = residual(g);
    if (settings.keep_log) stats.log.push_back({it + 1, energy, res});
  }

  stats.energy = eval_limit_energy(u, table);
  stats.residual = res;
  stats.iterations = it;
  stats.converged = res <= settings.tolerance;
  return {std::move(u), std::move(stats)};
}

DiscreteField build_recovery_sequence(const PlanarField& u,
                                      const RecoveryParams& params, double h_k,
                                      std::array<int, 3> film_grid,
                                      std::array<double, 2> omega) {
  if (!params.corrector) throw PreconditionViolated("recovery: corrector field missing");
  if (!(params.delta > 0.0) || !(params.delta < 1.0))
    throw PreconditionViolated("recovery: delta must lie in (0,1)");
  check_tubular_radius(u.manifold, params.delta);

  double phi_max = 0.0;
  for (const Vec3& v : params.corrector->values)
    phi_max = std::max(phi_max, v.norm());
  // smallness condition: h ||phi||_inf max(||grad zeta||_inf, 2/delta) < 1
  if (h_k * phi_max * (6.0 / params.delta) >= 1.0)
    throw PreconditionViolated(
        "recovery: h_k ||phi||_inf ||grad zeta||_inf >= 1; decrease h or the corrector");

  const double t = params.corrector_t;
  DiscreteField out;
  out.grid.nodes = film_grid;
  out.grid.length = {omega[0], omega[1], 1.0};
  out.domain = SlabDomain::film(omega);
  out.constraint = ManifoldValued{u.manifold};
  out.lateral_bc = NoLateralBC{};
  out.values.resize(out.grid.num_nodes());

  for (int k = 0; k < film_grid[2]; ++k)
    for (int j = 0; j < film_grid[1]; ++j)
      for (int i = 0; i < film_grid[0]; ++i) {
        const Vec3 x = out.grid.node_position(i, j, k);
        const Vec3 uu = u.sample({x[0], x[1]});
        // corner-anchored t-periodic extension of the corrector
        const double y1 = wrap((x[0] + 0.5 * omega[0]) / h_k, t) - 0.5 * t;
        const double y2 = wrap((x[1] + 0.5 * omega[1]) / h_k, t) - 0.5 * t;
        const Vec3 phi = sample_field(*params.corrector, Vec3(y1, y2, x[2]));
        const double z = cutoff((uu - params.s0).norm(), params.delta);
        const Vec3 w = uu + h_k * z * phi;
        out.at(i, j, k) = nearest_point(u.manifold, w);
      }
  return out;
}

double recovery_sup_distance(const DiscreteField& u_k, const PlanarField& u) {
  double worst = 0.0;
  const auto& n = u_k.grid.nodes;
  for (int k = 0; k < n[2]; ++k)
    for (int j = 0; j < n[1]; ++j)
      for (int i = 0; i < n[0]; ++i) {
        const Vec3 x = u_k.grid.node_position(i, j, k);
        worst = std::max(worst, (u_k.at(i, j, k) - u.sample({x[0], x[1]})).norm());
      }
  return worst;
}

}  // namespace thinhom
