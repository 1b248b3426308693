#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "isqa/models.hpp"
#include "isqa/problems.hpp"

namespace isqa {

// A frozen subproblem instance
//   Q(d) = g^T d + 0.5 d^T H d + psi(x + d) - psi(x),
// with Q(0) = 0 exactly.
struct Subproblem {
  Vector x;
  Vector grad;
  const QuadraticModel* model = nullptr;
  const Regularizer* reg = nullptr;
  double psi_x = 0.0;

  static Subproblem at(Vector x, Vector grad, const QuadraticModel& model,
                       const Regularizer& reg);

  Index dim() const { return x.size(); }
  double psi_shift(const Vector& d) const { return reg->value(x + d) - psi_x; }
  double objective(const Vector& d) const {
    return grad.dot(d) + 0.5 * d.dot(model->apply(d)) + psi_shift(d);
  }
  // Certified: sigma_H + strong convexity carried by the regularizer.
  double convexity_margin() const {
    return model->lower_bound() + reg->strong_convexity();
  }
  bool strongly_convex() const { return convexity_margin() > 0; }
};

// Termination control for inner solvers. Fixed runs exactly T iterations,
// Increasing runs 1 + floor(k/10) at outer iteration k, GapCheck stops once
// Q(d) <= (1 - eta) * Qstar for a reference Qstar.
struct InnerPolicy {
  enum class Kind { Fixed, Increasing, GapCheck };

  static InnerPolicy fixed(int iterations);
  static InnerPolicy increasing();
  static InnerPolicy gap_check(double eta,
                               std::function<double(const Subproblem&)> qstar_provider = {});

  int budget(int outer_k) const;

  Kind kind = Kind::Fixed;
  int iterations = 10;
  double eta = 0.0;
  std::function<double(const Subproblem&)> qstar_provider;  // defaults to reference_qstar
};

struct InnerResult {
  Vector d;
  int inner_iters = 0;
  double q_value = 0.0;
  std::optional<double> measured_eta;  // only under GapCheck
  bool descent = false;                // q_value < 0
  int skipped_coordinates = 0;         // rpcd: zero-diagonal coordinates
};

// SpaRSA: proximal gradient on Q with Barzilai-Borwein steps and
// nonmonotone acceptance over a 10-step memory. Returns the best iterate
// by Q; descent == false signals Q >= 0 after policy exhaustion.
InnerResult sparsa_solve(const Subproblem& sub, const InnerPolicy& policy, int outer_k,
                         std::uint64_t seed);

// Cyclic coordinate descent with a fresh seeded random permutation per
// sweep, for subproblems whose regularizer is the nonnegativity indicator.
// Block-diagonal models are solved independently per block with
// deterministic per-block seeds (master seed + block index); blocks may run
// in parallel under ISQA_THREADS.
InnerResult rpcd_solve(const Subproblem& sub, const InnerPolicy& policy, int outer_k,
                       std::uint64_t seed);

// High-accuracy minimization for diagnostics and tests only: the matching
// budgeted solver (20,000 iterations) refined by an active-set solve on the
// densified model when the dimension permits.
InnerResult reference_solve(const Subproblem& sub);
double reference_qstar(const Subproblem& sub);

}  // namespace isqa
