#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "isqa/subsolvers.hpp"

namespace isqa {

enum class OuterAlgorithm { LineSearch, ModifyH1, ModifyH2, ExactLineSearch };

struct OuterConfig {
  OuterAlgorithm algorithm = OuterAlgorithm::LineSearch;
  double backtrack_factor = 0.5;     // step / modification shrink factor in (0,1)
  double sufficient_decrease = 1e-4; // acceptance coefficient; (0,1) for line
                                     // search, (0,1] for modify-H
  int max_outer = 1000;
  double stop_tol = 1e-8;            // on the prox-gradient residual norm
  std::optional<double> fstar;       // enables relative-error stopping
  double rel_stop = 0.0;             // stop when (F - fstar)/|fstar| <= rel_stop
  int max_backtracks = 60;
  bool measure_eta = false;          // per-solve reference Q* instrumentation
  bool record_time = true;           // wall time per iteration; 0 when off
  std::uint64_t seed = 0;
};

struct IterRecord {
  int k = 0;
  double objective = 0.0;        // F(x^k), before the step
  double delta = 0.0;            // linearized decrease of the accepted d
  double q_d = 0.0;              // Q(d) of the accepted d
  double alpha = 1.0;            // accepted step size (1 for modify-H)
  int mods = 0;                  // backtracks (Alg. 1) or H modifications (Alg. 2)
  int inner_iters = 0;           // total inner iterations this outer iteration
  double eta = std::numeric_limits<double>::quiet_NaN();  // max measured this iteration
  double norm_G = 0.0;           // prox-gradient residual at x^k
  double sigma_H = 0.0;          // certified bounds of the final model
  double M_H = 0.0;
  double time_s = 0.0;
  bool fallback = false;         // prox-gradient fallback step
};

struct OuterTrace {
  std::vector<IterRecord> records;
  Vector final_x;
  double final_objective = 0.0;
  std::string stop_reason;
  OuterConfig config;
};

// Fired after each accepted step, before the model source sees (s, y).
struct IterEvent {
  int k;
  const Vector& x;  // iterate before the step
  const Vector& d;
  double alpha;
  double objective_before;
  double objective_after;
  const Subproblem& sub;        // final accepted subproblem
  const QuadraticModel& model;  // final H_k
  const IterRecord& record;
};
using IterObserver = std::function<void(const IterEvent&)>;

// Produces the initial quadratic term for each outer iteration and absorbs
// accepted steps.
class ModelSource {
 public:
  virtual ~ModelSource() = default;
  virtual std::unique_ptr<QuadraticModel> model_at(int k) = 0;
  virtual void observe_step(const Vector& s, const Vector& y) {
    (void)s;
    (void)y;
  }
};

// Clones a fixed prototype every iteration (identity, dense, block-diagonal).
class FixedModelSource final : public ModelSource {
 public:
  explicit FixedModelSource(std::unique_ptr<QuadraticModel> prototype)
      : prototype_(std::move(prototype)) {}
  std::unique_ptr<QuadraticModel> model_at(int) override { return prototype_->clone(); }

 private:
  std::unique_ptr<QuadraticModel> prototype_;
};

class LbfgsModelSource final : public ModelSource {
 public:
  explicit LbfgsModelSource(Index dim, int memory = 10) : state_(dim, memory) {}
  std::unique_ptr<QuadraticModel> model_at(int) override { return state_.model(); }
  void observe_step(const Vector& s, const Vector& y) override { state_.update(s, y); }
  const LbfgsState& state() const { return state_; }

 private:
  LbfgsState state_;
};

using InnerSolver =
    std::function<InnerResult(const Subproblem&, const InnerPolicy&, int, std::uint64_t)>;

// Linearized decrease g^T d + psi(x+d) - psi(x) used by the Armijo test;
// equals Q(d) - 0.5 d^T H d.
double linearized_decrease(const Subproblem& sub, const Vector& d);

// Step size of an exact line search on a quadratic along d, clamped to
// [0, 1]; zero curvature yields 1.
double exact_linesearch_step(double grad_dot_d, double curvature);

// Backtracking line search on the step size (Armijo condition
// F(x + alpha d) <= F(x) + alpha * gamma * Delta with alpha = beta^i).
OuterTrace solve_linesearch(const CompositeProblem& problem, ModelSource& models,
                            const InnerSolver& inner, const InnerPolicy& policy,
                            const OuterConfig& config, Vector x0, IterObserver observer = {});

// Modification of the quadratic term until F(x) - F(x+d) >= -gamma Q(d).
// Variant 1 rescales H^0 by successive 1/beta factors (requires H^0
// positive definite); Variant 2 adds increasing multiples of the identity.
// Accepted steps are always unit steps.
OuterTrace solve_modify_h(const CompositeProblem& problem, ModelSource& models,
                          const InnerSolver& inner, const InnerPolicy& policy,
                          const OuterConfig& config, int variant, Vector x0,
                          IterObserver observer = {});

// Exact line search for problems with a quadratic smooth part and a convex
// feasible set reached through the inner solver (x + d stays feasible, so
// any alpha in [0,1] does too).
OuterTrace solve_exact_linesearch(const CompositeProblem& problem, ModelSource& models,
                                  const InnerSolver& inner, const InnerPolicy& policy,
                                  const OuterConfig& config, Vector x0,
                                  IterObserver observer = {});

// Dispatch on config.algorithm.
OuterTrace solve(const CompositeProblem& problem, ModelSource& models, const InnerSolver& inner,
                 const InnerPolicy& policy, const OuterConfig& config, Vector x0,
                 IterObserver observer = {});

}  // namespace isqa
