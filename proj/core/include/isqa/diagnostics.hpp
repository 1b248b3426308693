#pragma once

#include <string>
#include <vector>

#include "isqa/outer.hpp"

namespace isqa {

// Prox-gradient residual with unit metric,
//   G = argmin_d  grad f(x)^T d + 0.5 d^T d + psi(x+d) - psi(x)
//     = prox_psi(x - grad f(x), 1) - x.
// ||G|| = 0 exactly at first-order stationary points.
Vector prox_grad_stationarity(const CompositeProblem& problem, const Vector& x);

// eta = 1 - Q(d)/Qstar_ref for a negative reference optimum. Values in
// [0,1) certify the multiplicative inexactness condition; >= 1 flags a
// violation (d no better than 0).
double measure_eta(const Subproblem& sub, const Vector& d, double qstar_ref);

struct RateViolation {
  std::string check;
  int k = 0;
  double observed = 0.0;
  double bound = 0.0;
};

// Per-iteration data that requires the live model: quadratic forms
// (x^k - x*)^T H_k (x^k - x*) and distances to a reference optimum.
// Attach observer() to a solve, then hand the collected columns to
// certify_rates.
class CertificationProbe {
 public:
  explicit CertificationProbe(Vector reference_opt) : x_opt_(std::move(reference_opt)) {}
  IterObserver observer();
  const std::vector<double>& hquad_to_opt() const { return hquad_; }
  const std::vector<double>& dist_to_opt() const { return dist_; }

 private:
  Vector x_opt_;
  std::vector<double> hquad_;
  std::vector<double> dist_;
};

struct RateInputs {
  double lipschitz = 0.0;
  double mu = 0.0;     // optimal-set strong convexity modulus; 0 when unknown
  double fstar = 0.0;  // from a long reference run
  bool unit_step = false;  // modify-H semantics (alpha == 1 in the caps)
  std::vector<double> hquad_to_opt;  // optional, from CertificationProbe
  std::vector<double> dist_to_opt;   // optional
};

struct RateReport {
  double mu = 0.0;
  double lipschitz = 0.0;
  double fstar = 0.0;
  double sigma_min = 0.0;  // extreme certified model bounds over the run
  double m_max = 0.0;
  double eta_bar = std::numeric_limits<double>::quiet_NaN();
  double min_alpha = 1.0;
  double r0_estimate = std::numeric_limits<double>::quiet_NaN();
  int k0_estimate = -1;

  std::vector<double> objective_gap;    // F_k - F*, length records+1
  std::vector<double> contraction;      // gap_{k+1}/gap_k
  std::vector<double> contraction_cap;  // per-iteration cap, NaN where not applicable
  std::vector<int> early_linear;        // 1 condition held, 0 not, -1 unknown
  std::vector<double> min_abs_q;        // running min |Q_t|
  std::vector<double> min_norm_g;       // running min ||G_t||

  std::vector<RateViolation> violations;
  std::vector<std::string> notes;  // skipped checks and why

  bool all_passed() const { return violations.empty(); }
};

// Re-asserts every rate inequality the run is subject to: the strongly
// convex per-iteration caps, the early-linear-phase cap on iterations where
// the proxy condition holds, the running |Q| bound, the stationarity decay
// bound, and the sublinear cap past k0. Violations are reported, never
// silently dropped.
RateReport certify_rates(const OuterTrace& trace, const RateInputs& inputs);

std::string rate_report_json(const RateReport& report);

// Worst-case simulation of the three-sequence recurrence: from delta_0,
//   delta_{k+1} = delta_k + c_k (-l delta_k + 0.5 a_k l^2),
// with l the minimizer over [0,1]. Verifies the one-step halving
// conclusion whenever delta_k >= a_k and the 2A/(sum c + 2) tail bound
// past the first k with delta_k < A.
struct SequenceInstance {
  double delta0 = 0.0;
  std::vector<double> c;  // in [0, 2]
  std::vector<double> a;  // in (0, A]
  double a_bound = 1.0;   // A
};

struct SequenceVerdict {
  bool linear_ok = true;
  bool sublinear_ok = true;
  int first_failure = -1;
  bool ok() const { return linear_ok && sublinear_ok; }
};

SequenceVerdict sequence_lemma_oracle(const SequenceInstance& inst, int n_steps);

// Checks Qstar_k <= mu/(mu + M_Hk) * (F* - F(x^k)) on every iteration with
// a measured eta (the reference optimum is recovered as Q_k/(1 - eta_k)).
struct QstarBoundVerdict {
  int checked = 0;
  std::vector<RateViolation> violations;
  bool ok() const { return violations.empty(); }
};

QstarBoundVerdict check_qstar_bound(const OuterTrace& trace, double mu, double fstar);

}  // namespace isqa
