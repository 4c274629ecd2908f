#include <doctest.h>

#include "support/random_util.hpp"
#include "thinhom/film.hpp"

using namespace thinhom;

namespace {

IntegrandSpec iso_const(double a = 1.0) {
  IntegrandSpec s;
  s.coeff = CoefficientField::constant(a);
  return s;
}

IntegrandSpec laminate14() {
  IntegrandSpec s;
  s.coeff = CoefficientField::laminate(1.0, 4.0, 0.5, 1);
  return s;
}

FilmProblem sphere_problem(double h, std::array<int, 3> grid) {
  FilmProblem p;
  p.integrand = iso_const();
  p.manifold = ManifoldDescriptor::sphere(1.0);
  p.h = h;
  p.s0 = Vec3::UnitZ();
  p.grid = grid;
  return p;
}

}  // namespace

TEST_CASE("film energy: constant field has zero energy") {
  FilmProblem p = sphere_problem(0.25, {7, 7, 3});
  const DiscreteField u = film_datum_extension(p);
  CHECK(eval_film_energy(u, p) == doctest::Approx(0.0));
}

TEST_CASE("film energy: x3-linear tangent perturbation, 1/h cancellation") {
  for (double h : {1e-2, 1e-3}) {
    FilmProblem p = sphere_problem(h, {5, 5, 9});
    DiscreteField u = film_datum_extension(p);
    const Vec3 tau = Vec3::UnitX();  // unit tangent at the north pole
    for (int k = 0; k < 5 * 5 * 9; ++k) {
      const int kz = k / 25;
      const double x3 = u.grid.node_position(0, 0, kz)[2];
      u.values[k] = nearest_point(p.manifold, p.s0 + h * x3 * tau);
    }
    const double e = eval_film_energy(u, p, /*check_bc=*/false);
    CHECK(std::abs(e - 1.0) < 50.0 * h * h + 1e-10);
  }
}

TEST_CASE("film energy: boundary violations are rejected") {
  FilmProblem p = sphere_problem(0.25, {5, 5, 3});
  p.xi0(0, 0) = 0.2;
  DiscreteField u = film_datum_extension(p);
  u.at(0, 2, 1) = nearest_point(p.manifold, u.at(0, 2, 1) + Vec3(0.05, 0, 0));
  CHECK_THROWS_AS(eval_film_energy(u, p), BCViolation);
}

TEST_CASE("minimize_film: constant datum stays put with zero energy") {
  FilmProblem p = sphere_problem(0.25, {5, 5, 3});
  const auto [u, stats] = minimize_film(p);
  CHECK(stats.energy == doctest::Approx(0.0));
  CHECK(stats.iterations == 0);
}

TEST_CASE("minimize_film: affine plane with affine datum is exact") {
  FilmProblem p;
  p.integrand = iso_const();
  p.manifold = ManifoldDescriptor::plane(Vec3::Zero(), Vec3::UnitZ());
  p.h = 0.25;
  p.s0 = Vec3::Zero();
  p.xi0 = Mat32::Zero();
  p.xi0(0, 0) = 0.4;
  p.xi0(1, 1) = -0.3;
  p.grid = {7, 7, 3};
  const auto [u, stats] = minimize_film(p);
  CHECK(stats.energy == doctest::Approx(0.16 + 0.09).epsilon(1e-10));
  CHECK(u.constraint_residual() < 1e-12);
  // energies never increase along the descent
  CHECK(stats.converged);
}

TEST_CASE("minimize_film: iterate energies are nonincreasing (sphere, laminate)") {
  FilmProblem p = sphere_problem(0.5, {17, 9, 3});
  p.integrand = laminate14();
  p.xi0(0, 0) = 0.2;
  p.solver.keep_log = true;
  p.solver.max_iterations = 400;
  const auto [u, stats] = minimize_film(p);
  REQUIRE(stats.log.size() > 1);
  for (size_t i = 1; i < stats.log.size(); ++i)
    CHECK(stats.log[i].energy <= stats.log[i - 1].energy + 1e-15);
  CHECK(u.constraint_residual() < 1e-8);
}

TEST_CASE("planar fields and the limit energy on flat targets") {
  const auto plane = ManifoldDescriptor::plane(Vec3::Zero(), Vec3::UnitZ());

  TableBuildParams params;
  params.base_points = {Vec3::Zero()};
  params.xi_max = 1.0;
  params.m = 5;
  params.t_list = {1};
  params.n = 4;
  params.integrand = iso_const();
  const DensityTable table = build_density_table(plane, params);

  // constant planar field: zero energy
  PlanarField constant = planar_datum(plane, Vec3::Zero(), Mat32::Zero(), {9, 9}, {1, 1});
  CHECK(eval_limit_energy(constant, table) == doctest::Approx(0.0));

  // affine datum with on-grid slope: |xi0|^2 |omega| exactly (flat case)
  Mat32 xi0 = Mat32::Zero();
  xi0(0, 0) = 0.5;  // a table node for m = 5, xi_max = 1
  PlanarField affine = planar_datum(plane, Vec3::Zero(), xi0, {9, 9}, {1, 1});
  LimitEnergyDiagnostics diag;
  CHECK(eval_limit_energy(affine, table, &diag) == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(diag.out_of_range == 0);
  CHECK(diag.max_drift < 1e-12);
}

TEST_CASE("minimize_limit reproduces the affine minimizer on the plane") {
  const auto plane = ManifoldDescriptor::plane(Vec3::Zero(), Vec3::UnitZ());
  TableBuildParams params;
  params.base_points = {Vec3::Zero()};
  params.xi_max = 1.0;
  params.m = 5;
  params.t_list = {1};
  params.n = 4;
  params.integrand = iso_const();
  const DensityTable table = build_density_table(plane, params);

  Mat32 xi0 = Mat32::Zero();
  xi0(0, 0) = 0.5;
  SolverSettings solver;
  solver.tolerance = 1e-10;
  const auto [u, stats] = minimize_limit(table, plane, Vec3::Zero(), xi0, {9, 9},
                                         {1, 1}, solver);
  CHECK(stats.energy == doctest::Approx(0.25).epsilon(1e-8));
}

TEST_CASE("recovery sequence: zero corrector returns u unchanged") {
  const auto sphere = ManifoldDescriptor::sphere(1.0);
  Mat32 xi0 = Mat32::Zero();
  xi0(0, 0) = 0.2;
  const PlanarField u = planar_datum(sphere, Vec3::UnitZ(), xi0, {9, 9}, {1, 1});

  DiscreteField zero_phi = seed_field(SlabDomain::cell(1), {5, 5, 3},
                                      TangentSubspace{tangent_frame(sphere, Vec3::UnitZ())},
                                      ZeroLateral{}, ZeroInit{});
  RecoveryParams rec;
  rec.s0 = Vec3::UnitZ();
  rec.corrector = &zero_phi;
  rec.corrector_t = 1;
  rec.delta = 0.45;
  const DiscreteField u_k = build_recovery_sequence(u, rec, 0.25, {9, 9, 3}, {1, 1});
  CHECK(recovery_sup_distance(u_k, u) < 1e-12);
}

TEST_CASE("recovery sequence: sup distance bounded by h * sup|phi| and manifold-valued") {
  const auto sphere = ManifoldDescriptor::sphere(1.0);
  const TangentFrame north = tangent_frame(sphere, Vec3::UnitZ());
  const PlanarField u = planar_datum(sphere, Vec3::UnitZ(), Mat32::Zero(), {9, 9}, {1, 1});

  // hand-made tangent corrector with zero lateral trace
  DiscreteField phi = seed_field(SlabDomain::cell(1), {9, 9, 3},
                                 TangentSubspace{north}, ZeroLateral{}, ZeroInit{});
  double phi_max = 0.0;
  for (int k = 0; k < 3; ++k)
    for (int j = 1; j < 8; ++j)
      for (int i = 1; i < 8; ++i) {
        const Vec3 x = phi.grid.node_position(i, j, k);
        phi.at(i, j, k) =
            0.3 * std::cos(M_PI * x[0]) * std::cos(M_PI * x[1]) * Vec3::UnitX();
        phi_max = std::max(phi_max, phi.at(i, j, k).norm());
      }

  RecoveryParams rec;
  rec.s0 = Vec3::UnitZ();
  rec.corrector = &phi;
  rec.corrector_t = 1;
  rec.delta = 0.45;

  const double h = 1.0 / 16;
  const DiscreteField u_k = build_recovery_sequence(u, rec, h, {17, 17, 3}, {1, 1});
  // |Pi(s0 + h phi) - s0| <= h |phi| on the unit sphere (projection is 1-Lipschitz
  // from the tangent offset here)
  CHECK(recovery_sup_distance(u_k, u) <= h * phi_max + 1e-12);
  CHECK(u_k.constraint_residual() < 1e-12);

  // smallness condition rejects too-large h
  CHECK_THROWS_AS(build_recovery_sequence(u, rec, 20.0, {17, 17, 3}, {1, 1}),
                  PreconditionViolated);
}
