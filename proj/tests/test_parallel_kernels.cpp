#include <doctest.h>

#include "support/random_util.hpp"
#include "thinhom/assembly.hpp"
#include "thinhom/parallel.hpp"

using namespace thinhom;

namespace {

AssemblyPlan laminate_plan(const DiscreteField& field, bool with_frame) {
  IntegrandSpec spec;
  spec.coeff = CoefficientField::laminate(1.0, 4.0, 0.5, 1);
  std::optional<TangentFrame> frame;
  if (with_frame)
    frame = tangent_frame(ManifoldDescriptor::sphere(1.0), {0, 0, 1});
  Mat32 xi = Mat32::Zero();
  xi(0, 0) = 1.0;
  return make_plan(field, DensityParams{spec, frame, 1.0, 0.0}, xi,
                   GradientScale{}, QuadratureRule{2});
}

}  // namespace

TEST_CASE("OpenMP kernels match the serial reference bit for bit") {
  std::mt19937_64 rng(53);
  DiscreteField field = seed_field(SlabDomain::cell(2), {19, 17, 6},
                                   FreeConstraint{}, ZeroLateral{}, ZeroInit{});
  for (Vec3& v : field.values) v = testutil::random_vec3(rng, 0.7);

  for (bool with_frame : {false, true}) {
    const AssemblyPlan plan = laminate_plan(field, with_frame);
    for (int threads : {1, 2, 3, 5}) {
      par::set_threads(threads);
      const double e_par = plan.energy(field.values);
      std::vector<Vec3> g_par;
      plan.gradient(field.values, g_par);

      par::set_threads(1);
      const double e_ser = plan.energy_serial(field.values);
      std::vector<Vec3> g_ser;
      plan.gradient_serial(field.values, g_ser);

      CHECK(e_par == e_ser);
      REQUIRE(g_par.size() == g_ser.size());
      for (size_t i = 0; i < g_par.size(); ++i) CHECK(g_par[i] == g_ser[i]);
    }
  }
}

TEST_CASE("results are independent of the thread count") {
  std::mt19937_64 rng(59);
  DiscreteField field = seed_field(SlabDomain::cell(1), {13, 13, 7},
                                   FreeConstraint{}, ZeroLateral{}, ZeroInit{});
  for (Vec3& v : field.values) v = testutil::random_vec3(rng, 0.7);
  const AssemblyPlan plan = laminate_plan(field, true);

  par::set_threads(1);
  const double e1 = plan.energy(field.values);
  std::vector<Vec3> g1;
  plan.gradient(field.values, g1);

  par::set_threads(4);
  const double e4 = plan.energy(field.values);
  std::vector<Vec3> g4;
  plan.gradient(field.values, g4);
  par::set_threads(0);

  CHECK(e1 == e4);
  for (size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g4[i]);
}
