#pragma once

#include <optional>
#include <string>
#include <vector>

#include "thinhom/assembly.hpp"

namespace thinhom {

struct SolverSettings {
  double tolerance = 1e-8;   // on the normalized gradient sup-norm
  int max_iterations = 20000;
  std::string step_rule = "bb";  // "bb" (Barzilai-Borwein trial step) or "fixed"
  double armijo_c = 1e-4;        // sufficient-decrease constant, halving search
  bool keep_log = false;
};

struct IterRecord {
  int iter;
  double energy;
  double residual;
};

struct SolveStats {
  double energy = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<IterRecord> log;
};

/// Projected gradient descent over the linear subspace of nodal values:
/// free components per node are either tangent-frame coordinates (frame set,
/// the Constrained cell formulation) or all of R^3 (Penalized). Dirichlet
/// nodes (plan mask) keep their initial values. Armijo backtracking on the
/// exact energy; trial steps per `step_rule`.
SolveStats minimize_on_subspace(const AssemblyPlan& plan,
                                const std::optional<TangentFrame>& frame,
                                std::vector<Vec3>& values,
                                const SolverSettings& settings);

/// Riemannian descent for manifold-valued fields: nodal gradients are
/// projected onto T_{u_n}(M), steps are retracted by nearest-point
/// projection, and steps that leave the projection neighborhood are rejected
/// and halved (an error only when halving floors out).
SolveStats minimize_on_manifold(const AssemblyPlan& plan,
                                const ManifoldDescriptor& manifold,
                                std::vector<Vec3>& values,
                                const SolverSettings& settings);

}  // namespace thinhom
