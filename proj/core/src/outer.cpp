#include "isqa/outer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace isqa {

double linearized_decrease(const Subproblem& sub, const Vector& d) {
  return sub.grad.dot(d) + sub.psi_shift(d);
}

double exact_linesearch_step(double grad_dot_d, double curvature) {
  if (curvature <= 0) return 1.0;
  return std::clamp(-grad_dot_d / curvature, 0.0, 1.0);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void validate_config(const OuterConfig& cfg, bool modify_h) {
  if (!(cfg.backtrack_factor > 0 && cfg.backtrack_factor < 1))
    throw ConfigError("backtrack factor must lie in (0,1)");
  double hi = modify_h ? 1.0 + 1e-15 : 1.0;
  if (!(cfg.sufficient_decrease > 0) || cfg.sufficient_decrease >= hi)
    throw ConfigError(modify_h ? "sufficient-decrease coefficient must lie in (0,1]"
                               : "sufficient-decrease coefficient must lie in (0,1)");
  if (cfg.max_outer < 0) throw ConfigError("max_outer must be nonnegative");
  if (cfg.max_backtracks < 1) throw ConfigError("max_backtracks must be positive");
}

Vector prox_residual(const CompositeProblem& problem, const Vector& x, const Vector& grad) {
  return problem.reg->prox(x - grad, 1.0) - x;
}

std::uint64_t iter_seed(const OuterConfig& cfg, int k) {
  return cfg.seed + static_cast<std::uint64_t>(k) * 1000003ULL;
}

// Updates the running maximum of measured inexactness for one inner solve.
void measure_solve_eta(const OuterConfig& cfg, const Subproblem& sub, const InnerResult& res,
                       double& eta_max, bool& measured) {
  if (!cfg.measure_eta || !sub.strongly_convex()) return;
  double qstar = reference_qstar(sub);
  if (!(qstar < 0)) return;
  double eta = std::max(0.0, 1.0 - res.q_value / qstar);
  eta_max = measured ? std::max(eta_max, eta) : eta;
  measured = true;
}

struct LoopState {
  double objective;
  Vector grad;
};

// Shared end-of-iteration bookkeeping: record, observer, model update.
void finish_iteration(const CompositeProblem& problem, ModelSource& models,
                      const IterObserver& observer, OuterTrace& trace, IterRecord rec,
                      const Subproblem& sub, const QuadraticModel& model, const Vector& d,
                      double alpha, Vector& x, LoopState& state, double objective_after) {
  trace.records.push_back(rec);
  if (observer) {
    IterEvent ev{rec.k,  x,   d,     alpha, state.objective, objective_after,
                 sub,    model, trace.records.back()};
    observer(ev);
  }
  Vector x_next = x + alpha * d;
  Vector grad_next = problem.smooth->gradient(x_next);
  models.observe_step(x_next - x, grad_next - state.grad);
  x = std::move(x_next);
  state.objective = objective_after;
  state.grad = std::move(grad_next);
}

// Closed-form proximal-gradient step with the Lipschitz metric, used when
// an inner solver reports no descent on a sound subproblem.
struct FallbackStep {
  Vector d;
  double q_d;
  double delta;
  bool stationary;
};

FallbackStep fallback_prox_step(const CompositeProblem& problem, const Subproblem& sub,
                                const Vector& x, const Vector& grad) {
  const double L = std::max(problem.smooth->lipschitz_estimate(), 1e-300);
  FallbackStep fb;
  fb.d = problem.reg->prox(x - grad / L, 1.0 / L) - x;
  fb.delta = grad.dot(fb.d) + sub.psi_shift(fb.d);
  fb.q_d = fb.delta + 0.5 * L * fb.d.squaredNorm();
  fb.stationary = fb.d.lpNorm<Eigen::Infinity>() == 0.0;
  return fb;
}

bool relative_stop(const OuterConfig& cfg, double objective) {
  if (!cfg.fstar || cfg.rel_stop <= 0) return false;
  double denom = std::max(std::abs(*cfg.fstar), 1e-300);
  return (objective - *cfg.fstar) / denom <= cfg.rel_stop;
}

}  // namespace

OuterTrace solve_linesearch(const CompositeProblem& problem, ModelSource& models,
                            const InnerSolver& inner, const InnerPolicy& policy,
                            const OuterConfig& cfg, Vector x, IterObserver observer) {
  validate_config(cfg, /*modify_h=*/false);
  OuterTrace trace;
  trace.config = cfg;
  trace.stop_reason = "max-outer";
  LoopState state{problem.value(x), problem.smooth->gradient(x)};

  for (int k = 0; k < cfg.max_outer; ++k) {
    auto tic = Clock::now();
    double norm_G = prox_residual(problem, x, state.grad).norm();
    if (norm_G <= cfg.stop_tol) {
      trace.stop_reason = "stationarity";
      break;
    }
    if (relative_stop(cfg, state.objective)) {
      trace.stop_reason = "relative-error";
      break;
    }

    auto model = models.model_at(k);
    Subproblem sub = Subproblem::at(x, state.grad, *model, *problem.reg);
    if (!sub.strongly_convex())
      throw ConfigError("line-search algorithm requires a strongly convex subproblem");

    InnerResult res = inner(sub, policy, k, iter_seed(cfg, k));
    double eta_max = 0.0;
    bool measured = false;
    if (res.measured_eta) {
      eta_max = *res.measured_eta;
      measured = true;
    }
    measure_solve_eta(cfg, sub, res, eta_max, measured);

    IterRecord rec;
    rec.k = k;
    rec.objective = state.objective;
    rec.norm_G = norm_G;
    rec.inner_iters = res.inner_iters;
    rec.sigma_H = model->lower_bound();
    rec.M_H = model->upper_bound();

    Vector d;
    double alpha = 1.0;
    double objective_after = 0.0;
    if (!res.descent) {
      FallbackStep fb = fallback_prox_step(problem, sub, x, state.grad);
      if (fb.stationary) {
        trace.stop_reason = "stationary-subproblem";
        break;
      }
      d = std::move(fb.d);
      rec.fallback = true;
      rec.q_d = fb.q_d;
      rec.delta = fb.delta;
      const double L = problem.smooth->lipschitz_estimate();
      rec.sigma_H = L;
      rec.M_H = L;
      objective_after = problem.value(x + d);
    } else {
      d = res.d;
      rec.q_d = res.q_value;
      rec.delta = linearized_decrease(sub, d);
      int backtracks = 0;
      while (true) {
        objective_after = problem.value(x + alpha * d);
        if (objective_after <= state.objective + alpha * cfg.sufficient_decrease * rec.delta)
          break;
        if (++backtracks > cfg.max_backtracks)
          throw SolverError("backtracking line search exceeded " +
                            std::to_string(cfg.max_backtracks) +
                            " steps; Lipschitz estimate is likely wrong");
        alpha *= cfg.backtrack_factor;
      }
      rec.mods = backtracks;
    }
    rec.alpha = alpha;
    if (measured) rec.eta = eta_max;
    rec.time_s = cfg.record_time ? seconds_since(tic) : 0.0;

    finish_iteration(problem, models, observer, trace, rec, sub, *model, d, alpha, x, state,
                     objective_after);
  }

  trace.final_x = std::move(x);
  trace.final_objective = state.objective;
  return trace;
}

OuterTrace solve_modify_h(const CompositeProblem& problem, ModelSource& models,
                          const InnerSolver& inner, const InnerPolicy& policy,
                          const OuterConfig& cfg, int variant, Vector x, IterObserver observer) {
  validate_config(cfg, /*modify_h=*/true);
  if (variant != 1 && variant != 2) throw ConfigError("modify-H variant must be 1 or 2");
  OuterTrace trace;
  trace.config = cfg;
  trace.stop_reason = "max-outer";
  LoopState state{problem.value(x), problem.smooth->gradient(x)};

  for (int k = 0; k < cfg.max_outer; ++k) {
    auto tic = Clock::now();
    double norm_G = prox_residual(problem, x, state.grad).norm();
    if (norm_G <= cfg.stop_tol) {
      trace.stop_reason = "stationarity";
      break;
    }
    if (relative_stop(cfg, state.objective)) {
      trace.stop_reason = "relative-error";
      break;
    }

    auto model = models.model_at(k);
    if (variant == 1 && !(model->lower_bound() > 0))
      throw ConfigError("modify-H variant 1 requires a positive definite initial model");

    double alpha = 1.0;
    double ridge_applied = 0.0;
    int mods = 0;
    int inner_total = 0;
    double eta_max = 0.0;
    bool measured = false;

    Subproblem sub = Subproblem::at(x, state.grad, *model, *problem.reg);
    InnerResult res = inner(sub, policy, k, iter_seed(cfg, k));
    inner_total += res.inner_iters;
    if (res.measured_eta) {
      eta_max = *res.measured_eta;
      measured = true;
    }
    measure_solve_eta(cfg, sub, res, eta_max, measured);

    bool use_fallback = false;
    double objective_after = 0.0;
    while (true) {
      bool ok = res.descent;
      if (ok) {
        objective_after = problem.value(x + res.d);
        ok = state.objective - objective_after >= -cfg.sufficient_decrease * res.q_value;
      }
      if (ok) break;
      if (!res.descent && sub.strongly_convex()) {
        // The subproblem was sound but the solver failed; modifying H
        // cannot help, so take the closed-form fallback step.
        use_fallback = true;
        break;
      }
      if (++mods > cfg.max_backtracks)
        throw SolverError("modify-H loop exceeded " + std::to_string(cfg.max_backtracks) +
                          " modifications");
      if (variant == 1) {
        alpha *= cfg.backtrack_factor;
        model->scale(1.0 / cfg.backtrack_factor);  // H = H0 / alpha
      } else {
        double ridge = 1.0 / alpha;
        model->shift(ridge - ridge_applied);  // H = H0 + alpha^{-1} I
        ridge_applied = ridge;
        alpha *= cfg.backtrack_factor;
      }
      sub = Subproblem::at(x, state.grad, *model, *problem.reg);
      res = inner(sub, policy, k, iter_seed(cfg, k) + static_cast<std::uint64_t>(mods) * 7919ULL);
      inner_total += res.inner_iters;
      if (res.measured_eta) {
        eta_max = measured ? std::max(eta_max, *res.measured_eta) : *res.measured_eta;
        measured = true;
      }
      measure_solve_eta(cfg, sub, res, eta_max, measured);
    }

    IterRecord rec;
    rec.k = k;
    rec.objective = state.objective;
    rec.norm_G = norm_G;
    rec.inner_iters = inner_total;
    rec.mods = mods;
    rec.sigma_H = model->lower_bound();
    rec.M_H = model->upper_bound();

    Vector d;
    if (use_fallback) {
      FallbackStep fb = fallback_prox_step(problem, sub, x, state.grad);
      if (fb.stationary) {
        trace.stop_reason = "stationary-subproblem";
        break;
      }
      d = std::move(fb.d);
      rec.fallback = true;
      rec.q_d = fb.q_d;
      rec.delta = fb.delta;
      const double L = problem.smooth->lipschitz_estimate();
      rec.sigma_H = L;
      rec.M_H = L;
      objective_after = problem.value(x + d);
    } else {
      d = res.d;
      rec.q_d = res.q_value;
      rec.delta = linearized_decrease(sub, d);
    }
    rec.alpha = 1.0;
    if (measured) rec.eta = eta_max;
    rec.time_s = cfg.record_time ? seconds_since(tic) : 0.0;

    finish_iteration(problem, models, observer, trace, rec, sub, *model, d, 1.0, x, state,
                     objective_after);
  }

  trace.final_x = std::move(x);
  trace.final_objective = state.objective;
  return trace;
}

OuterTrace solve_exact_linesearch(const CompositeProblem& problem, ModelSource& models,
                                  const InnerSolver& inner, const InnerPolicy& policy,
                                  const OuterConfig& cfg, Vector x, IterObserver observer) {
  validate_config(cfg, /*modify_h=*/false);
  if (!problem.smooth->curvature_along(Vector::Zero(problem.dimension)))
    throw ConfigError("exact line search requires a quadratic smooth part");
  OuterTrace trace;
  trace.config = cfg;
  trace.stop_reason = "max-outer";
  LoopState state{problem.value(x), problem.smooth->gradient(x)};

  for (int k = 0; k < cfg.max_outer; ++k) {
    auto tic = Clock::now();
    double norm_G = prox_residual(problem, x, state.grad).norm();
    if (norm_G <= cfg.stop_tol) {
      trace.stop_reason = "stationarity";
      break;
    }
    if (relative_stop(cfg, state.objective)) {
      trace.stop_reason = "relative-error";
      break;
    }

    auto model = models.model_at(k);
    Subproblem sub = Subproblem::at(x, state.grad, *model, *problem.reg);
    InnerResult res = inner(sub, policy, k, iter_seed(cfg, k));
    double eta_max = 0.0;
    bool measured = false;
    if (res.measured_eta) {
      eta_max = *res.measured_eta;
      measured = true;
    }
    measure_solve_eta(cfg, sub, res, eta_max, measured);

    IterRecord rec;
    rec.k = k;
    rec.objective = state.objective;
    rec.norm_G = norm_G;
    rec.inner_iters = res.inner_iters;
    rec.sigma_H = model->lower_bound();
    rec.M_H = model->upper_bound();

    Vector d;
    double alpha = 1.0;
    if (!res.descent) {
      FallbackStep fb = fallback_prox_step(problem, sub, x, state.grad);
      if (fb.stationary) {
        trace.stop_reason = "stationary-subproblem";
        break;
      }
      d = std::move(fb.d);
      rec.fallback = true;
      rec.q_d = fb.q_d;
      rec.delta = fb.delta;
      const double L = problem.smooth->lipschitz_estimate();
      rec.sigma_H = L;
      rec.M_H = L;
    } else {
      d = res.d;
      rec.q_d = res.q_value;
      rec.delta = linearized_decrease(sub, d);
      alpha = exact_linesearch_step(state.grad.dot(d), *problem.smooth->curvature_along(d));
    }
    double objective_after = problem.value(x + alpha * d);
    rec.alpha = alpha;
    if (measured) rec.eta = eta_max;
    rec.time_s = cfg.record_time ? seconds_since(tic) : 0.0;

    finish_iteration(problem, models, observer, trace, rec, sub, *model, d, alpha, x, state,
                     objective_after);
  }

  trace.final_x = std::move(x);
  trace.final_objective = state.objective;
  return trace;
}

OuterTrace solve(const CompositeProblem& problem, ModelSource& models, const InnerSolver& inner,
                 const InnerPolicy& policy, const OuterConfig& cfg, Vector x0,
                 IterObserver observer) {
  switch (cfg.algorithm) {
    case OuterAlgorithm::LineSearch:
      return solve_linesearch(problem, models, inner, policy, cfg, std::move(x0),
                              std::move(observer));
    case OuterAlgorithm::ModifyH1:
      return solve_modify_h(problem, models, inner, policy, cfg, 1, std::move(x0),
                            std::move(observer));
    case OuterAlgorithm::ModifyH2:
      return solve_modify_h(problem, models, inner, policy, cfg, 2, std::move(x0),
                            std::move(observer));
    case OuterAlgorithm::ExactLineSearch:
      return solve_exact_linesearch(problem, models, inner, policy, cfg, std::move(x0),
                                    std::move(observer));
  }
  throw ConfigError("unknown outer algorithm");
}

}  // namespace isqa
