// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Oracles are independent of the library solve paths (1D
// finite differences / 2D scalar CG in support/laminate_oracle.hpp).

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "support/laminate_oracle.hpp"
#include "support/random_util.hpp"
#include "thinhom/config.hpp"
#include "thinhom/verify.hpp"

using namespace thinhom;

namespace {

struct Criterion {
  int id;
  std::string label;
  bool pass = true;
  std::string detail;
  double seconds = 0.0;
};

std::vector<Criterion> g_results;

class Timer {
 public:
  Timer() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

void record(int id, const std::string& label, bool pass, const std::string& detail,
            double seconds) {
  g_results.push_back({id, label, pass, detail, seconds});
  std::printf("[%s] criterion %2d: %-34s %s (%.1f s)\n", pass ? "PASS" : "FAIL", id,
              label.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
}

IntegrandSpec iso_const() {
  IntegrandSpec s;
  s.coeff = CoefficientField::constant(1.0);
  return s;
}

IntegrandSpec laminate14() {
  IntegrandSpec s;
  s.coeff = CoefficientField::laminate(1.0, 4.0, 0.5, 1);
  return s;
}

CellProblem sphere_cell(IntegrandSpec spec, const Mat32& xi, int n, int t,
                        CellFormulation form) {
  CellProblem p;
  p.manifold = ManifoldDescriptor::sphere(1.0);
  p.base_point = Vec3::UnitZ();
  p.xi_alpha = xi;
  p.t = t;
  p.n = n;
  p.formulation = form;
  p.integrand = std::move(spec);
  return p;
}

Mat32 col1(const Vec3& v) {
  Mat32 xi = Mat32::Zero();
  xi.col(0) = v;
  return xi;
}

Mat32 col2(const Vec3& v) {
  Mat32 xi = Mat32::Zero();
  xi.col(1) = v;
  return xi;
}

char buf[512];

// shared solutions (criterion 2 computes them, criteria 3 and 8 reuse)
CellSolution g_lam_long_con;   // laminate, [e1|0], t=1, n=64, constrained
CellSolution g_lam_trans_con;  // laminate, [0|e2], t=1, n=64, constrained

void criterion_1_and_3_convex(std::vector<double>* gaps,
                              std::vector<std::pair<double, double>>* pairs) {
  Timer timer;
  std::mt19937_64 rng(42);
  const TangentFrame north =
      tangent_frame(ManifoldDescriptor::sphere(1.0), Vec3::UnitZ());
  bool pass = true;
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    Mat32 xi = testutil::random_tangent_mat32(north, rng, 0.7);
    const double norm = xi.norm();
    if (norm > 1.0) xi *= 0.95 / norm;  // |xi_alpha| <= 1
    const double want = xi.squaredNorm();

    const CellSolution con = solve_cell(
        sphere_cell(iso_const(), xi, 16, 1, CellFormulation::Constrained));
    const CellSolution pen = solve_cell(
        sphere_cell(iso_const(), xi, 16, 1, CellFormulation::Penalized));
    worst = std::max({worst, std::abs(con.value - want) / want,
                      std::abs(pen.value - want) / want});
    pass = pass && std::abs(con.value - want) / want <= 0.01 &&
           std::abs(pen.value - want) / want <= 0.01;
    gaps->push_back(std::abs(con.value - pen.value) /
                    std::max(con.value, 1e-12));
    pairs->emplace_back(pen.value, con.value);
  }
  const double sec = timer.seconds();
  pass = pass && sec <= 10.0;
  std::snprintf(buf, sizeof buf, "worst relative error %.2e, %.1f s budget 10 s",
                worst, sec);
  record(1, "convex closed form", pass, buf, sec);
}

void criterion_2_laminate(std::vector<double>* gaps,
                          std::vector<std::pair<double, double>>* pairs) {
  Timer timer;
  // independent 1D finite-difference oracle (written before the solver)
  const double oracle_long = oracle::laminate_cell_1d(1.0, 4.0, 0.5, 1.0, 4096);
  const double oracle_trans = oracle::arithmetic_mean(1.0, 4.0, 0.5);

  g_lam_long_con = solve_cell(
      sphere_cell(laminate14(), col1(Vec3::UnitX()), 64, 1, CellFormulation::Constrained));
  g_lam_trans_con = solve_cell(
      sphere_cell(laminate14(), col2(Vec3::UnitY()), 64, 1, CellFormulation::Constrained));

  const double err_long = std::abs(g_lam_long_con.value - oracle_long) / oracle_long;
  const double err_trans =
      std::abs(g_lam_trans_con.value - oracle_trans) / oracle_trans;
  const double sec = timer.seconds();
  const bool pass = err_long <= 0.02 && err_trans <= 0.02 && sec <= 120.0;

  // context for the expected failure: the t -> infinity estimate does reach
  // the homogenized value the 1D oracle computes
  CellProblem base = sphere_cell(laminate14(), col1(Vec3::UnitX()), 16, 1,
                                 CellFormulation::Penalized);
  const HomDensityEstimate est = estimate_hom_density(base, {1, 2, 4});

  std::snprintf(buf, sizeof buf,
                "[e1|0]: %.4f vs oracle %.4f (%.1f%%); [0|e2]: %.4f vs %.4f "
                "(%.2f%%); t->inf estimate %.4f (%.1f%%); %.0f s budget 120 s",
                g_lam_long_con.value, oracle_long, 100 * err_long,
                g_lam_trans_con.value, oracle_trans, 100 * err_trans, est.estimate,
                100 * std::abs(est.estimate - oracle_long) / oracle_long, sec);
  record(2, "laminate oracle at t = 1", pass, buf, sec);

  gaps->push_back(0.0);  // placeholder; criterion 3 fills laminate gaps itself
  (void)pairs;
}

void criterion_3_equality(std::vector<double> gaps,
                          std::vector<std::pair<double, double>> pairs) {
  Timer timer;
  // penalized twins of the criterion-2 problems at matched grids
  const CellSolution pen_long = solve_cell(
      sphere_cell(laminate14(), col1(Vec3::UnitX()), 64, 1, CellFormulation::Penalized));
  const CellSolution pen_trans = solve_cell(
      sphere_cell(laminate14(), col2(Vec3::UnitY()), 64, 1, CellFormulation::Penalized));

  gaps.push_back(std::abs(g_lam_long_con.value - pen_long.value) /
                 std::max(g_lam_long_con.value, 1e-12));
  gaps.push_back(std::abs(g_lam_trans_con.value - pen_trans.value) /
                 std::max(g_lam_trans_con.value, 1e-12));
  pairs.emplace_back(pen_long.value, g_lam_long_con.value);
  pairs.emplace_back(pen_trans.value, g_lam_trans_con.value);

  double worst_gap = 0.0;
  for (double g : gaps) worst_gap = std::max(worst_gap, g);
  bool ordered = true;
  for (const auto& [pen, con] : pairs) ordered = ordered && pen <= con + 1e-10;

  const bool pass = worst_gap <= 0.01 && ordered;
  std::snprintf(buf, sizeof buf,
                "worst relative gap %.2e (tol 1e-2), penalized <= constrained "
                "+ 1e-10 on %zu pairs: %s",
                worst_gap, pairs.size(), ordered ? "yes" : "NO");
  record(3, "constrained = penalized", pass, buf, timer.seconds());
}

void criterion_4_plane_reduction() {
  Timer timer;
  const auto plane = ManifoldDescriptor::plane(Vec3::Zero(), Vec3::UnitZ());
  CellProblem p;
  p.manifold = plane;
  p.base_point = Vec3::Zero();
  p.xi_alpha = col1(Vec3::UnitX());
  p.t = 1;
  p.n = 32;
  p.integrand = laminate14();

  p.formulation = CellFormulation::Constrained;
  const CellSolution constrained = solve_cell(p);
  p.formulation = CellFormulation::Penalized;  // [BFF]-style unconstrained route
  const CellSolution unconstrained = solve_cell(p);

  const double gap = std::abs(constrained.value - unconstrained.value) /
                     std::max(unconstrained.value, 1e-12);
  const bool pass = gap <= 0.005;
  std::snprintf(buf, sizeof buf,
                "constrained %.6f vs unconstrained %.6f, gap %.2e (tol 5e-3)",
                constrained.value, unconstrained.value, gap);
  record(4, "affine-plane reduction", pass, buf, timer.seconds());
}

DensityTable build_check_table(int n) {
  TableBuildParams params;
  params.base_points = {Vec3::UnitZ()};
  params.xi_max = 1.0;
  params.m = 5;
  params.t_list = {1};
  params.n = n;
  params.integrand = laminate14();
  return build_density_table(ManifoldDescriptor::sphere(1.0), params);
}

void criterion_5_quasiconvexity(const DensityTable& table, double table_seconds) {
  Timer timer;
  bool pass = true;
  double worst = -1e300;
  const std::array<std::array<double, 4>, 3> points{
      {{0.0, 0.0, 0.0, 0.0}, {0.5, 0.0, 0.0, 0.0}, {0.25, 0.25, 0.25, 0.25}}};
  for (size_t i = 0; i < points.size(); ++i) {
    const Mat32 xi = table.xi_from_coords(0, points[i]);
    const PropertyReport rep =
        verify_quasiconvexity(table, Vec3::UnitZ(), xi, 50, 42 + i, 0.005);
    pass = pass && rep.pass;
    worst = std::max(worst, rep.worst_violation);
  }
  const double sec = timer.seconds() + table_seconds;
  pass = pass && sec <= 300.0;
  std::snprintf(buf, sizeof buf,
                "50 psi x 3 points, worst violation %.2e (slack 5e-3), %.1f s "
                "incl. m=5 table build, budget 300 s",
                worst, sec);
  record(5, "tangential quasiconvexity", pass, buf, sec);
}

void criterion_6_growth_lipschitz(const DensityTable& table) {
  Timer timer;
  const DensityTable refined = build_check_table(2 * table.n);
  const PropertyReport rep = verify_lipschitz_growth(table, &refined, 0.10);
  const double drift = rep.provenance.at("drift").get<double>();
  std::snprintf(buf, sizeof buf,
                "envelope worst %.2e (<= 0 required), C_hat %.3f, drift under "
                "n -> 2n rebuild %.1f%% (tol 10%%)",
                rep.worst_violation, rep.provenance.at("C_hat").get<double>(),
                100 * drift);
  record(6, "growth envelope + Lipschitz", rep.pass, buf, timer.seconds());
}

void criterion_7_gradients() {
  Timer timer;
  std::mt19937_64 rng(1234);
  const TangentFrame north =
      tangent_frame(ManifoldDescriptor::sphere(1.0), Vec3::UnitZ());
  bool pass = true;
  double worst_p2 = 0.0, worst_ppow = 0.0;

  int field_count = 0;
  for (double p : {2.0, 1.5, 3.0}) {
    const double eps = p == 2.0 ? 0.0 : 1e-6;
    const double tol = p == 2.0 ? 1e-5 : 1e-4;
    const int fields = p == 2.0 ? 8 : 6;
    for (int trial = 0; trial < fields; ++trial, ++field_count) {
      DiscreteField f = seed_field(SlabDomain::cell(1), {6, 5, 4}, FreeConstraint{},
                                   NoLateralBC{}, ZeroInit{});
      for (Vec3& v : f.values) v = testutil::random_vec3(rng, 0.5);

      IntegrandSpec spec = trial % 2 ? laminate14() : iso_const();
      spec.p = p;
      if (trial % 3 == 0) {
        spec.form = IntegrandForm::ColumnWeighted;
        spec.weights = {1.0, 2.0, 0.5};
      }
      DensityParams density{spec, north, 1.0, eps};
      Mat32 xi = col1(0.4 * Vec3::UnitX());

      const auto grad = assemble_gradient(f, density, xi, GradientScale{1, 1, 4});
      double worst = 0.0, scale = 0.0;
      for (size_t node = 0; node < f.values.size(); node += 5) {
        for (int c = 0; c < 3; ++c) {
          const double step = 1e-6;
          DiscreteField fp = f, fm = f;
          fp.values[node][c] += step;
          fm.values[node][c] -= step;
          const double ep =
              assemble_energy(fp, density, xi, GradientScale{1, 1, 4});
          const double em =
              assemble_energy(fm, density, xi, GradientScale{1, 1, 4});
          worst = std::max(worst, std::abs((ep - em) / (2 * step) - grad[node][c]));
          scale = std::max(scale, std::abs(grad[node][c]));
        }
      }
      const double rel = worst / std::max(scale, 1e-12);
      if (p == 2.0)
        worst_p2 = std::max(worst_p2, rel);
      else
        worst_ppow = std::max(worst_ppow, rel);
      pass = pass && rel <= tol;
    }
  }
  std::snprintf(buf, sizeof buf,
                "%d fields; worst rel err p=2: %.2e (tol 1e-5), p in {1.5,3}: "
                "%.2e (tol 1e-4)",
                field_count, worst_p2, worst_ppow);
  record(7, "analytic vs FD gradients", pass, buf, timer.seconds());
}

void criterion_8_nested_refinement() {
  Timer timer;
  std::vector<double> values;
  for (int n : {8, 16, 32})
    values.push_back(
        solve_cell(sphere_cell(laminate14(), col1(Vec3::UnitX()), n, 1,
                               CellFormulation::Constrained))
            .value);
  values.push_back(g_lam_long_con.value);  // n = 64 from criterion 2

  bool pass = true;
  for (size_t i = 1; i < values.size(); ++i) pass = pass && values[i] <= values[i - 1];
  std::snprintf(buf, sizeof buf, "minima %.5f >= %.5f >= %.5f >= %.5f",
                values[0], values[1], values[2], values[3]);
  record(8, "nested dyadic refinement", pass, buf, timer.seconds());
}

void criterion_9_gamma_trend() {
  Timer timer;

  TableBuildParams tparams;
  tparams.base_points = {Vec3::UnitZ()};
  tparams.xi_max = 0.25;
  tparams.m = 11;
  tparams.t_list = {1, 2, 4};
  tparams.n = 4;
  tparams.integrand = laminate14();
  const DensityTable table =
      build_density_table(ManifoldDescriptor::sphere(1.0), tparams);

  GammaExperimentConfig config;
  config.integrand = laminate14();
  config.manifold = ManifoldDescriptor::sphere(1.0);
  config.s0 = Vec3::UnitZ();
  config.xi0 = col1(0.2 * Vec3::UnitX());
  config.h_list = {0.5, 0.25, 0.125};
  config.omega = {2.0, 2.0};
  // in-plane x1 resolution: 8 elements per coefficient period h
  config.grids = {{33, 17, 3}, {65, 33, 3}, {129, 65, 3}};
  config.planar_grid = {33, 33};
  config.corrector_t = 2;
  config.corrector_n = 8;
  config.delta = 0.49;

  const GammaReport rep = run_gamma_experiment(config, table);
  const double gap_first = rep.rows.front().gap;
  const double gap_last = rep.rows.back().gap;
  bool bounds = true;
  for (const auto& r : rep.rows) bounds = bounds && r.recovery_bound_ok;

  const double sec = timer.seconds();
  const bool pass = gap_last <= 0.05 && gap_last <= gap_first && bounds && sec <= 900.0;
  std::snprintf(buf, sizeof buf,
                "E* %.5f; gaps %.2f%% -> %.2f%% -> %.2f%%; recovery bounds "
                "exact: %s; %.0f s budget 900 s",
                rep.limit_energy, 100 * rep.rows[0].gap, 100 * rep.rows[1].gap,
                100 * rep.rows[2].gap, bounds ? "yes" : "NO", sec);
  record(9, "gamma-convergence trend", pass, buf, sec);
}

void criterion_10_recovery() {
  Timer timer;

  TableBuildParams tparams;
  tparams.base_points = {Vec3::UnitZ()};
  tparams.xi_max = 0.25;
  tparams.m = 11;
  tparams.t_list = {1, 2, 4};
  tparams.n = 4;
  tparams.integrand = laminate14();
  const DensityTable table =
      build_density_table(ManifoldDescriptor::sphere(1.0), tparams);

  const auto sphere = ManifoldDescriptor::sphere(1.0);
  const Mat32 xi0 = col1(0.2 * Vec3::UnitX());
  const PlanarField u = planar_datum(sphere, Vec3::UnitZ(), xi0, {33, 33}, {1, 1});
  const double limit = eval_limit_energy(u, table);

  CellProblem cp = sphere_cell(laminate14(), xi0, 8, 8, CellFormulation::Constrained);
  const CellSolution corrector = solve_cell(cp);

  RecoveryParams rec;
  rec.s0 = Vec3::UnitZ();
  rec.corrector = &corrector.argmin;
  rec.corrector_t = 8;
  rec.delta = 0.45;

  const std::array<double, 3> hs{0.25, 0.125, 0.0625};
  std::vector<double> cs, energies;
  for (double h : hs) {
    const int n1 = static_cast<int>(std::lround(8.0 / h)) + 1;  // 8 cells per period
    const std::array<int, 3> grid{n1, n1, 3};
    const DiscreteField u_k = build_recovery_sequence(u, rec, h, grid, {1, 1});
    cs.push_back(recovery_sup_distance(u_k, u) / h);

    FilmProblem fp;
    fp.integrand = laminate14();
    fp.manifold = sphere;
    fp.h = h;
    fp.s0 = Vec3::UnitZ();
    fp.xi0 = xi0;
    fp.grid = grid;
    energies.push_back(eval_film_energy(u_k, fp, /*check_bc=*/false));
  }

  double cmin = 1e300, cmax = 0.0;
  for (double c : cs) {
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
  }
  const double cmean = (cmin + cmax) / 2.0;
  const bool stable = cmin >= 0.8 * cmean && cmax <= 1.2 * cmean;

  const double rel = std::abs(energies.back() - limit) / std::max(limit, 1e-12);
  const bool pass = stable && rel <= 0.05;
  std::snprintf(buf, sizeof buf,
                "c = sup|u_k - u|/h in [%.4f, %.4f] (+-20%% of %.4f); energy at "
                "h=1/16: %.5f vs limit %.5f (%.2f%%, tol 5%%)",
                cmin, cmax, cmean, energies.back(), limit, 100 * rel);
  record(10, "recovery construction", pass, buf, timer.seconds());
}

}  // namespace

int main() {
  std::printf("acceptance suite (thin-film homogenization toolkit)\n");
  std::printf("---------------------------------------------------\n");

  std::vector<double> gaps;
  std::vector<std::pair<double, double>> pairs;  // (penalized, constrained)

  criterion_1_and_3_convex(&gaps, &pairs);
  criterion_2_laminate(&gaps, &pairs);
  criterion_3_equality(gaps, pairs);
  criterion_4_plane_reduction();

  Timer table_timer;
  const DensityTable check_table = build_check_table(8);
  const double table_seconds = table_timer.seconds();
  criterion_5_quasiconvexity(check_table, table_seconds);
  criterion_6_growth_lipschitz(check_table);

  criterion_7_gradients();
  criterion_8_nested_refinement();
  criterion_9_gamma_trend();
  criterion_10_recovery();

  int failures = 0;
  for (const auto& c : g_results) failures += c.pass ? 0 : 1;
  std::printf("---------------------------------------------------\n");
  std::printf("%zu criteria, %d failed\n", g_results.size(), failures);
  return failures == 0 ? 0 : 1;
}
