// Timing comparison of the OpenMP assembly kernels against their serial
// reference twins, and a consistency check that both produce identical bits.

#include <chrono>
#include <cstdio>
#include <random>

#include "thinhom/assembly.hpp"
#include "thinhom/parallel.hpp"

using namespace thinhom;

namespace {

double seconds(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, seconds(t0));
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 48;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 3;

  DiscreteField field = seed_field(SlabDomain::cell(1), {n + 1, n + 1, n + 1},
                                   FreeConstraint{}, ZeroLateral{}, ZeroInit{});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (Vec3& v : field.values) v = {u(rng), u(rng), u(rng)};

  IntegrandSpec spec;
  spec.coeff = CoefficientField::laminate(1.0, 4.0, 0.5);
  Mat32 offset = Mat32::Zero();
  offset(0, 0) = 1.0;

  const AssemblyPlan plan = make_plan(field, DensityParams{spec, std::nullopt, 1.0, 0.0},
                                      offset, GradientScale{}, QuadratureRule{2});

  std::printf("grid %d^3, %lld elements, %d threads\n", n,
              static_cast<long long>(field.grid.num_elements()), par::threads());

  double e_par = 0.0, e_ser = 0.0;
  std::vector<Vec3> g_par, g_ser;

  const double t_energy_par = time_best_of(reps, [&] { e_par = plan.energy(field.values); });
  const double t_energy_ser =
      time_best_of(reps, [&] { e_ser = plan.energy_serial(field.values); });
  const double t_grad_par =
      time_best_of(reps, [&] { plan.gradient(field.values, g_par); });
  const double t_grad_ser =
      time_best_of(reps, [&] { plan.gradient_serial(field.values, g_ser); });

  std::printf("energy   parallel %8.2f ms   serial %8.2f ms   speedup %.2fx\n",
              1e3 * t_energy_par, 1e3 * t_energy_ser, t_energy_ser / t_energy_par);
  std::printf("gradient parallel %8.2f ms   serial %8.2f ms   speedup %.2fx\n",
              1e3 * t_grad_par, 1e3 * t_grad_ser, t_grad_ser / t_grad_par);

  bool identical = e_par == e_ser;
  for (size_t i = 0; i < g_par.size() && identical; ++i)
    identical = g_par[i] == g_ser[i];
  std::printf("parallel/serial results bit-identical: %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
