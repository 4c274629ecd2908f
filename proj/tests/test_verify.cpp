#include <doctest.h>

#include "support/random_util.hpp"
#include "thinhom/verify.hpp"

using namespace thinhom;

namespace {

IntegrandSpec iso_const(double a = 1.0) {
  IntegrandSpec s;
  s.coeff = CoefficientField::constant(a);
  return s;
}

DensityTable quadratic_table(double xi_max = 1.0, int m = 5, int n = 4) {
  TableBuildParams params;
  params.base_points = {Vec3::UnitZ()};
  params.xi_max = xi_max;
  params.m = m;
  params.t_list = {1};
  params.n = n;
  params.integrand = iso_const();
  return build_density_table(ManifoldDescriptor::sphere(1.0), params);
}

}  // namespace

TEST_CASE("quasiconvexity: convex |xi|^2 table never violates") {
  const DensityTable table = quadratic_table();
  Mat32 xi = Mat32::Zero();
  const PropertyReport rep =
      verify_quasiconvexity(table, Vec3::UnitZ(), xi, 25, 42);
  CHECK(rep.pass);
  CHECK(rep.worst_violation <= 0.0 + 1e-12);
  CHECK(rep.samples == 25);
}

TEST_CASE("quasiconvexity: base point without margin is rejected") {
  const DensityTable table = quadratic_table();
  const Mat32 xi = table.xi_from_coords(0, {0.95, 0, 0, 0});
  CHECK_THROWS_AS(verify_quasiconvexity(table, Vec3::UnitZ(), xi, 5, 1),
                  OutOfTableRange);
}

TEST_CASE("quasiconvexity is deterministic in the seed") {
  const DensityTable table = quadratic_table();
  const Mat32 xi = Mat32::Zero();
  const PropertyReport a = verify_quasiconvexity(table, Vec3::UnitZ(), xi, 10, 7);
  const PropertyReport b = verify_quasiconvexity(table, Vec3::UnitZ(), xi, 10, 7);
  CHECK(a.worst_violation == b.worst_violation);
}

TEST_CASE("growth/Lipschitz suite: |xi|^p table has exact envelope and stable ratio") {
  const DensityTable table = quadratic_table(1.0, 5, 4);
  const DensityTable refined = quadratic_table(1.0, 5, 8);
  const PropertyReport rep = verify_lipschitz_growth(table, &refined);
  CHECK(rep.pass);
  CHECK(rep.worst_violation <= 0.0);
  CHECK(rep.provenance.at("drift").get<double>() <= 0.10);
  CHECK(rep.provenance.at("C_hat").get<double>() > 0.0);
}

TEST_CASE("rank-one convexity holds exactly for the convex table") {
  const DensityTable table = quadratic_table();
  const PropertyReport rep = verify_rank_one(table, Vec3::UnitZ(), 100, 42);
  CHECK(rep.pass);
  CHECK(rep.worst_violation <= 1e-10);
}

TEST_CASE("gamma experiment: flat plane with affine datum is exact at every h") {
  const auto plane = ManifoldDescriptor::plane(Vec3::Zero(), Vec3::UnitZ());
  TableBuildParams params;
  params.base_points = {Vec3::Zero()};
  params.xi_max = 1.0;
  params.m = 5;
  params.t_list = {1};
  params.n = 4;
  params.integrand = iso_const();
  const DensityTable table = build_density_table(plane, params);

  GammaExperimentConfig config;
  config.integrand = iso_const();
  config.manifold = plane;
  config.s0 = Vec3::Zero();
  config.xi0 = Mat32::Zero();
  config.xi0(0, 0) = 0.5;  // table node
  config.h_list = {0.5, 0.25};
  config.grids = {{9, 9, 3}, {9, 9, 3}};
  config.planar_grid = {9, 9};
  config.corrector_t = 1;
  config.corrector_n = 4;
  config.delta = 0.25;

  const GammaReport rep = run_gamma_experiment(config, table);
  CHECK(rep.limit_energy == doctest::Approx(0.25).epsilon(1e-8));
  REQUIRE(rep.rows.size() == 2);
  for (const auto& row : rep.rows) {
    CHECK(row.E_h == doctest::Approx(0.25).epsilon(1e-8));
    CHECK(row.gap < 1e-6);
    CHECK(row.recovery_bound_ok);
    CHECK(row.recovery_energy >= row.E_h - 1e-12);
  }
}

TEST_CASE("gamma experiment: misaligned corrector period is rejected") {
  const DensityTable table = quadratic_table();
  GammaExperimentConfig config;
  config.integrand = iso_const();
  config.manifold = ManifoldDescriptor::sphere(1.0);
  config.h_list = {0.3};
  config.grids = {{9, 9, 3}};
  config.corrector_t = 1;  // 1 / (0.3 * 1) is not an integer
  CHECK_THROWS_AS(run_gamma_experiment(config, table), RangeError);
}

TEST_CASE("reports serialize with pass flags as pure functions of the data") {
  PropertyReport rep;
  rep.name = "demo";
  rep.samples = 3;
  rep.worst_violation = 0.01;
  rep.tolerance = 0.005;
  rep.pass = rep.worst_violation <= rep.tolerance;
  CHECK_FALSE(rep.pass);
  const auto j = rep.to_json();
  CHECK(j.at("name") == "demo");
  CHECK(j.at("pass") == false);
}
