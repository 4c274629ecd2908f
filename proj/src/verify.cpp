#include "thinhom/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace thinhom {

nlohmann::json PropertyReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["samples"] = samples;
  j["worst_violation"] = worst_violation;
  j["tolerance"] = tolerance;
  j["pass"] = pass;
  j["provenance"] = provenance;
  return j;
}

nlohmann::json GammaReport::to_json() const {
  nlohmann::json j;
  j["limit_energy"] = limit_energy;
  j["planar_iterations"] = planar_iterations;
  j["limit_out_of_range"] = limit_diag.out_of_range;
  j["limit_max_drift"] = limit_diag.max_drift;
  for (const auto& r : rows) {
    nlohmann::json jr;
    jr["h"] = r.h;
    jr["E_h"] = r.E_h;
    jr["E_datum_start"] = r.E_datum_start;
    jr["E_recovery_start"] = r.E_recovery_start;
    jr["recovery_energy"] = r.recovery_energy;
    jr["gap"] = r.gap;
    jr["iterations"] = r.iterations;
    jr["converged"] = r.converged;
    jr["recovery_bound_ok"] = r.recovery_bound_ok;
    j["ladder"].push_back(jr);
  }
  j["provenance"] = provenance;
  return j;
}

namespace {

// Deterministic zero-boundary bilinear psi in tangent coordinates on a
// g x g node mesh of Q'; returns per-quadrature-point gradient coordinate
// increments (axis layout matching DensityTable).
struct PsiSample {
  int g;
  std::vector<Eigen::Vector2d> coords;  // nodal tangent coordinates

  explicit PsiSample(int g_) : g(g_), coords(g_ * g_, Eigen::Vector2d::Zero()) {}

  void randomize(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int j = 1; j + 1 < g; ++j)
      for (int i = 1; i + 1 < g; ++i) coords[j * g + i] = {u(rng), u(rng)};
  }

  // gradient of psi-coordinates at the 2x2 Gauss points of every cell:
  // entries d(psi_i)/d(x_j) laid out as table axis 2*i + j.
  std::vector<std::array<double, 4>> gradients() const {
    const double h = 1.0 / (g - 1);
    const double gq = 1.0 / std::sqrt(3.0);
    std::vector<std::array<double, 4>> out;
    out.reserve((g - 1) * (g - 1) * 4);
    for (int j = 0; j + 1 < g; ++j)
      for (int i = 0; i + 1 < g; ++i) {
        const Eigen::Vector2d c00 = coords[j * g + i];
        const Eigen::Vector2d c10 = coords[j * g + i + 1];
        const Eigen::Vector2d c01 = coords[(j + 1) * g + i];
        const Eigen::Vector2d c11 = coords[(j + 1) * g + i + 1];
        for (int qj = 0; qj < 2; ++qj)
          for (int qi = 0; qi < 2; ++qi) {
            const double xi = qi ? gq : -gq, eta = qj ? gq : -gq;
            const double lx0 = 0.5 * (1 - xi), lx1 = 0.5 * (1 + xi);
            const double ly0 = 0.5 * (1 - eta), ly1 = 0.5 * (1 + eta);
            const Eigen::Vector2d d1 =
                ((c10 - c00) * ly0 + (c11 - c01) * ly1) / h;
            const Eigen::Vector2d d2 =
                ((c01 - c00) * lx0 + (c11 - c10) * lx1) / h;
            out.push_back({d1[0], d2[0], d1[1], d2[1]});
          }
      }
    return out;
  }
};

}  // namespace

PropertyReport verify_quasiconvexity(const DensityTable& table, const Vec3& s,
                                     const Mat32& xi_alpha, int n_tests,
                                     std::uint64_t seed, double slack,
                                     int psi_grid) {
  const int k = table.nearest_base(s);
  const auto c0 = table.coords_of(k, xi_alpha);
  const double margin = 0.3 * table.xi_max;
  if (!table.in_range(c0, margin))
    throw OutOfTableRange(
        "verify_quasiconvexity: (s, xi) leaves no margin for perturbations");

  PropertyReport rep;
  rep.name = "tangential_quasiconvexity";
  rep.samples = n_tests;
  rep.tolerance = slack;
  rep.provenance = {{"seed", seed},        {"slack", slack},
                    {"psi_grid", psi_grid}, {"table_m", table.m},
                    {"table_n", table.n},   {"xi_max", table.xi_max}};

  std::mt19937_64 rng(seed);
  const double lhs = table.query_coords(k, c0);
  double worst = 0.0;
  PsiSample psi(psi_grid);
  for (int test = 0; test < n_tests; ++test) {
    psi.randomize(rng);
    auto grads = psi.gradients();
    double gmax = 0.0;
    for (const auto& d : grads) {
      double sq = 0.0;
      for (double v : d) sq += v * v;
      gmax = std::max(gmax, std::sqrt(sq));
    }
    const double scale = gmax > 0.0 ? margin / gmax : 0.0;
    double rhs = 0.0;
    for (const auto& d : grads) {
      std::array<double, 4> c = c0;
      for (int a = 0; a < 4; ++a) c[a] += scale * d[a];
      rhs += table.query_coords(k, c);
    }
    rhs /= static_cast<double>(grads.size());  // uniform weights over Q'
    const double violation = (lhs - rhs) / std::max(std::abs(lhs), 1e-12);
    worst = std::max(worst, violation);
  }
  rep.worst_violation = worst;
  rep.pass = worst <= slack;
  return rep;
}

PropertyReport verify_lipschitz_growth(const DensityTable& table,
                                       const DensityTable* refined,
                                       double drift_tol) {
  PropertyReport rep;
  rep.name = "growth_lipschitz";
  rep.tolerance = 0.0;

  const double C = table.envelope_C;
  const std::int64_t per = table.entries_per_frame();
  const int K = static_cast<int>(table.frames.size());

  double env_worst = -1e300;
  const auto envelope_violation = [&](const DensityTable& t, int k, std::int64_t e) {
    std::array<int, 4> idx;
    std::int64_t rest = e;
    for (int a = 3; a >= 0; --a) {
      idx[a] = static_cast<int>(rest % t.m);
      rest /= t.m;
    }
    const Mat32 xi = t.xi_from_coords(k, t.coords_at(idx));
    const double xn = std::pow(xi.squaredNorm(), 0.5 * t.p);
    const double v = t.values[k * t.entries_per_frame() + e];
    const double low = xn / C - 1e-8;
    const double high = C * (1.0 + xn);
    return std::max(low - v, v - high);
  };

  std::int64_t samples = 0;
  for (int k = 0; k < K; ++k)
    for (std::int64_t e = 0; e < per; ++e, ++samples)
      env_worst = std::max(env_worst, envelope_violation(table, k, e));

  // empirical Lipschitz ratio over entry pairs (strided subsample when large)
  const auto lipschitz_ratio = [](const DensityTable& t) {
    const std::int64_t per_f = t.entries_per_frame();
    const int stride = per_f > 2000 ? static_cast<int>(per_f / 2000 + 1) : 1;
    double chat = 0.0;
    for (int k = 0; k < int(t.frames.size()); ++k) {
      std::vector<std::pair<Mat32, double>> pts;
      for (std::int64_t e = 0; e < per_f; e += stride) {
        std::array<int, 4> idx;
        std::int64_t rest = e;
        for (int a = 3; a >= 0; --a) {
          idx[a] = static_cast<int>(rest % t.m);
          rest /= t.m;
        }
        pts.emplace_back(t.xi_from_coords(k, t.coords_at(idx)),
                         t.values[k * per_f + e]);
      }
      for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j) {
          const double dxi = (pts[i].first - pts[j].first).norm();
          if (dxi <= 1e-9) continue;  // degenerate pair policy
          const double xi_i = pts[i].first.norm(), xi_j = pts[j].first.norm();
          const double denom =
              dxi * (1.0 + std::pow(xi_i, t.p - 1.0) + std::pow(xi_j, t.p - 1.0));
          chat = std::max(chat, std::abs(pts[i].second - pts[j].second) / denom);
        }
    }
    return chat;
  };

  const double chat = lipschitz_ratio(table);
  rep.provenance["C_hat"] = chat;
  rep.provenance["envelope_C"] = C;
  rep.provenance["envelope_worst"] = env_worst;
  rep.provenance["entries"] = samples;

  bool pass = env_worst <= 0.0;
  double drift = 0.0;
  if (refined) {
    const double chat2 = lipschitz_ratio(*refined);
    drift = std::abs(chat2 - chat) / std::max(chat, 1e-12);
    rep.provenance["C_hat_refined"] = chat2;
    rep.provenance["drift"] = drift;
    rep.provenance["drift_tol"] = drift_tol;
    pass = pass && drift <= drift_tol;
  }
  rep.samples = static_cast<int>(samples);
  rep.worst_violation = env_worst;
  rep.pass = pass;
  return rep;
}

PropertyReport verify_rank_one(const DensityTable& table, const Vec3& s,
                               int n_segments, std::uint64_t seed, double slack) {
  const int k = table.nearest_base(s);
  PropertyReport rep;
  rep.name = "rank_one_convexity";
  rep.samples = n_segments;
  rep.tolerance = slack;
  rep.provenance = {{"seed", seed}, {"slack", slack}, {"table_m", table.m}};

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);

  double worst = -1e300;
  for (int seg = 0; seg < n_segments; ++seg) {
    // random tangent rank-one direction a (x) nu in coordinates
    const double ta = ang(rng), tn = ang(rng);
    const Eigen::Vector2d a(std::cos(ta), std::sin(ta));
    const Eigen::Vector2d nu(std::cos(tn), std::sin(tn));
    std::array<double, 4> d;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) d[2 * i + j] = a[i] * nu[j];

    std::array<double, 4> c0;
    for (auto& c : c0) c = 0.5 * table.xi_max * u(rng);
    double dmax = 0.0;
    for (int a4 = 0; a4 < 4; ++a4) dmax = std::max(dmax, std::abs(d[a4]));
    const double lam = dmax > 0.0
                           ? 0.45 * table.xi_max / dmax * std::abs(u(rng))
                           : 0.0;  // zero-length segments are trivially convex

    std::array<double, 4> cm = c0, cp = c0;
    for (int a4 = 0; a4 < 4; ++a4) {
      cm[a4] -= lam * d[a4];
      cp[a4] += lam * d[a4];
    }
    const double mid = table.query_coords(k, c0);
    const double avg = 0.5 * (table.query_coords(k, cm) + table.query_coords(k, cp));
    const double violation = (mid - avg) / std::max(std::abs(mid), 1e-12);
    worst = std::max(worst, violation);
  }
  rep.worst_violation = worst;
  rep.pass = worst <= slack;
  return rep;
}

GammaReport run_gamma_experiment(const GammaExperimentConfig& config,
                                 const DensityTable& table) {
  if (config.h_list.empty())
    throw RangeError("gamma experiment: empty h ladder");
  for (size_t i = 1; i < config.h_list.size(); ++i)
    if (!(config.h_list[i] < config.h_list[i - 1]))
      throw RangeError("gamma experiment: h ladder must be strictly decreasing");
  if (config.grids.size() != config.h_list.size())
    throw RangeError("gamma experiment: need one grid per h");
  for (double h : config.h_list) {
    const double ratio = config.omega[0] / (h * config.corrector_t);
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
      throw RangeError(
          "gamma experiment: corrector period t*h must divide the domain width "
          "(recovery field admissibility)");
  }

  GammaReport report;

  // planar limit minimizer and E*
  auto [u_star, planar_stats] =
      minimize_limit(table, config.manifold, config.s0, config.xi0,
                     config.planar_grid, config.omega, config.solver);
  report.limit_energy = eval_limit_energy(u_star, table, &report.limit_diag);
  report.planar_iterations = planar_stats.iterations;

  // tangent-valued corrector at (s0, xi0)
  CellProblem cp;
  cp.manifold = config.manifold;
  cp.base_point = config.s0;
  cp.xi_alpha = config.xi0;
  cp.t = config.corrector_t;
  cp.n = config.corrector_n;
  cp.formulation = CellFormulation::Constrained;
  cp.integrand = config.integrand;
  cp.epsilon = config.epsilon;
  cp.quad = config.quad;
  cp.solver = config.solver;
  const CellSolution corrector = solve_cell(cp);

  RecoveryParams rec;
  rec.s0 = config.s0;
  rec.corrector = &corrector.argmin;
  rec.corrector_t = config.corrector_t;
  rec.delta = config.delta;

  for (size_t hi = 0; hi < config.h_list.size(); ++hi) {
    const double h = config.h_list[hi];
    FilmProblem fp;
    fp.integrand = config.integrand;
    fp.manifold = config.manifold;
    fp.h = h;
    fp.s0 = config.s0;
    fp.xi0 = config.xi0;
    fp.grid = config.grids[hi];
    fp.omega = config.omega;
    fp.epsilon = config.epsilon;
    fp.quad = config.quad;
    fp.solver = config.solver;

    GammaRow row;
    row.h = h;

    auto [u_datum, stats_datum] = minimize_film(fp);
    row.E_datum_start = stats_datum.energy;
    row.iterations = stats_datum.iterations;
    row.converged = stats_datum.converged;

    const DiscreteField u_k =
        build_recovery_sequence(u_star, rec, h, fp.grid, fp.omega);
    row.recovery_energy = eval_film_energy(u_k, fp, /*check_bc=*/true);

    auto [u_rec, stats_rec] = minimize_film(fp, &u_k);
    row.E_recovery_start = stats_rec.energy;
    row.iterations += stats_rec.iterations;
    row.converged = row.converged && stats_rec.converged;

    row.E_h = std::min(row.E_datum_start, row.E_recovery_start);
    row.gap = std::abs(row.E_h - report.limit_energy) /
              std::max(report.limit_energy, 1e-12);
    row.recovery_bound_ok = row.E_h <= row.recovery_energy + 1e-14;
    report.rows.push_back(row);
  }
  return report;
}

void print_report(const PropertyReport& report) {
  std::printf("%-28s samples=%-5d worst=%+.3e tol=%.3e  %s\n",
              report.name.c_str(), report.samples, report.worst_violation,
              report.tolerance, report.pass ? "PASS" : "FAIL");
}

void print_report(const GammaReport& report) {
  std::printf("limit energy E* = %.6g (out-of-range lookups: %d, drift %.2e)\n",
              report.limit_energy, report.limit_diag.out_of_range,
              report.limit_diag.max_drift);
  std::printf("%8s %12s %12s %12s %8s %6s\n", "h", "E_h", "recovery", "gap",
              "iters", "bound");
  for (const auto& r : report.rows)
    std::printf("%8.4f %12.6g %12.6g %11.2f%% %8d %6s\n", r.h, r.E_h,
                r.recovery_energy, 100.0 * r.gap, r.iterations,
                r.recovery_bound_ok ? "ok" : "VIOLATED");
}

}  // namespace thinhom
