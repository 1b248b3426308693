#include "isqa/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace isqa {

Vector prox_grad_stationarity(const CompositeProblem& problem, const Vector& x) {
  Vector g = problem.smooth->gradient(x);
  return problem.reg->prox(x - g, 1.0) - x;
}

double measure_eta(const Subproblem& sub, const Vector& d, double qstar_ref) {
  if (!(qstar_ref < 0)) throw ConfigError("eta reference must be a negative Q*");
  return 1.0 - sub.objective(d) / qstar_ref;
}

IterObserver CertificationProbe::observer() {
  return [this](const IterEvent& ev) {
    Vector e = ev.x - x_opt_;
    hquad_.push_back(e.dot(ev.model.apply(e)));
    dist_.push_back(e.norm());
  };
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool finite(double v) { return std::isfinite(v); }

}  // namespace

RateReport certify_rates(const OuterTrace& trace, const RateInputs& in) {
  RateReport rep;
  rep.mu = in.mu;
  rep.lipschitz = in.lipschitz;
  rep.fstar = in.fstar;

  const auto& recs = trace.records;
  const size_t n = recs.size();
  const double gamma = trace.config.sufficient_decrease;
  if (n == 0) {
    rep.notes.push_back("empty trace");
    return rep;
  }

  const bool have_hquad = in.hquad_to_opt.size() >= n;
  const bool have_dist = in.dist_to_opt.size() >= n;
  bool any_fallback = false;

  rep.sigma_min = recs[0].sigma_H;
  rep.m_max = recs[0].M_H;
  rep.min_alpha = 1.0;
  double eta_bar = kNaN;
  for (const IterRecord& r : recs) {
    any_fallback |= r.fallback;
    if (r.fallback) continue;
    rep.sigma_min = std::min(rep.sigma_min, r.sigma_H);
    rep.m_max = std::max(rep.m_max, r.M_H);
    rep.min_alpha = std::min(rep.min_alpha, r.alpha);
    if (finite(r.eta)) eta_bar = finite(eta_bar) ? std::max(eta_bar, r.eta) : r.eta;
  }
  rep.eta_bar = eta_bar;
  if (have_dist)
    rep.r0_estimate = *std::max_element(in.dist_to_opt.begin(), in.dist_to_opt.begin() + n);

  rep.objective_gap.resize(n + 1);
  for (size_t k = 0; k < n; ++k) rep.objective_gap[k] = recs[k].objective - in.fstar;
  rep.objective_gap[n] = trace.final_objective - in.fstar;

  // running minima
  rep.min_abs_q.resize(n);
  rep.min_norm_g.resize(n);
  double run_q = kInf, run_g = kInf;
  for (size_t k = 0; k < n; ++k) {
    if (!recs[k].fallback) run_q = std::min(run_q, std::abs(recs[k].q_d));
    run_g = std::min(run_g, recs[k].norm_G);
    rep.min_abs_q[k] = run_q;
    rep.min_norm_g[k] = run_g;
  }

  // per-iteration contraction checks
  rep.contraction.assign(n, kNaN);
  rep.contraction_cap.assign(n, kNaN);
  rep.early_linear.assign(n, -1);
  for (size_t k = 0; k < n; ++k) {
    double gap = rep.objective_gap[k];
    double gap_next = rep.objective_gap[k + 1];
    if (!(gap > 0)) {
      rep.violations.push_back({"positive-gap", static_cast<int>(k), gap, 0.0});
      continue;
    }
    double ratio = gap_next / gap;
    rep.contraction[k] = ratio;
    if (recs[k].fallback) continue;

    double eta_k = finite(recs[k].eta) ? recs[k].eta : eta_bar;
    if (in.mu > 0 && finite(eta_k)) {
      double alpha_term = in.unit_step ? 1.0 : recs[k].alpha;
      double cap = 1.0 - alpha_term * gamma * (1.0 - eta_k) * in.mu / (in.mu + recs[k].M_H);
      rep.contraction_cap[k] = cap;
      if (ratio > cap + 1e-12)
        rep.violations.push_back({"qlinear-cap", static_cast<int>(k), ratio, cap});
    }
    if (have_hquad && finite(eta_k)) {
      bool early = gap >= in.hquad_to_opt[k];
      rep.early_linear[k] = early ? 1 : 0;
      if (early) {
        double alpha_term = in.unit_step ? 1.0 : recs[k].alpha;
        double cap = 1.0 - (1.0 - eta_k) * gamma * alpha_term / 2.0;
        if (ratio > cap + 1e-12)
          rep.violations.push_back({"early-linear-cap", static_cast<int>(k), ratio, cap});
      }
    }
  }

  if (any_fallback) {
    rep.notes.push_back("fallback steps present: aggregate bounds skipped");
  } else {
    const double total_drop = rep.objective_gap[0];  // F(x^0) - F*

    // running |Q| bound; the telescoped acceptance tests need H PSD for
    // the line-search algorithm
    if (rep.sigma_min >= 0 || trace.config.algorithm == OuterAlgorithm::ModifyH1 ||
        trace.config.algorithm == OuterAlgorithm::ModifyH2) {
      double min_alpha_run = 1.0;
      for (size_t k = 0; k < n; ++k) {
        min_alpha_run = std::min(min_alpha_run, recs[k].alpha);
        double denom = gamma * static_cast<double>(k + 1) * min_alpha_run;
        double bound = total_drop / denom;
        if (rep.min_abs_q[k] > bound + 1e-10)
          rep.violations.push_back(
              {"qmin-bound", static_cast<int>(k), rep.min_abs_q[k], bound});
      }
    } else {
      rep.notes.push_back("sigma_min < 0: running |Q| bound skipped");
    }

    // stationarity decay bound
    if (rep.sigma_min > 0 && finite(eta_bar) && eta_bar < 1) {
      const double s = rep.sigma_min, m = rep.m_max;
      double root = std::sqrt(std::max(0.0, 1.0 - 2.0 / m + 1.0 / (s * s)));
      double coef = m * m * std::pow(1.0 + 1.0 / s + root, 2) / (2.0 * (1.0 - eta_bar) * s);
      double min_alpha_run = 1.0;
      for (size_t k = 0; k < n; ++k) {
        min_alpha_run = std::min(min_alpha_run, recs[k].alpha);
        double alpha_term = in.unit_step ? 1.0 : min_alpha_run;
        double bound = total_drop / (gamma * static_cast<double>(k + 1)) * coef / alpha_term;
        double lhs = rep.min_norm_g[k] * rep.min_norm_g[k];
        if (lhs > bound * (1 + 1e-10) + 1e-300)
          rep.violations.push_back({"gmin-bound", static_cast<int>(k), lhs, bound});
      }
    } else {
      rep.notes.push_back("stationarity decay bound skipped (needs sigma_min > 0 and eta)");
    }

    // sublinear tail bound past k0, with R0 estimated from the trace
    if (have_dist && finite(eta_bar) && eta_bar < 1 && rep.m_max > 0) {
      double big_a = rep.m_max * rep.r0_estimate * rep.r0_estimate;
      double alpha_sum = 0.0;
      for (size_t k = 0; k <= n; ++k) {
        if (rep.k0_estimate < 0) {
          if (rep.objective_gap[k] < big_a)
            rep.k0_estimate = static_cast<int>(k);
          else
            continue;
        }
        if (static_cast<int>(k) > rep.k0_estimate)
          alpha_sum += in.unit_step ? 1.0 : recs[k - 1].alpha;
        double bound = 2.0 * big_a / (gamma * (1.0 - eta_bar) * alpha_sum + 2.0);
        if (rep.objective_gap[k] > bound * (1 + 1e-8) + 1e-12)
          rep.violations.push_back(
              {"sublinear-cap", static_cast<int>(k), rep.objective_gap[k], bound});
      }
    }
  }

  return rep;
}

std::string rate_report_json(const RateReport& rep) {
  nlohmann::json j;
  j["constants"] = {
      {"mu", rep.mu},
      {"lipschitz", rep.lipschitz},
      {"fstar", rep.fstar},
      {"sigma_min", rep.sigma_min},
      {"m_max", rep.m_max},
      {"eta_bar", rep.eta_bar},
      {"min_alpha", rep.min_alpha},
      {"r0_estimate", rep.r0_estimate},
      {"k0_estimate", rep.k0_estimate},
  };
  j["objective_gap"] = rep.objective_gap;
  j["contraction"] = rep.contraction;
  j["contraction_cap"] = rep.contraction_cap;
  j["early_linear"] = rep.early_linear;
  j["min_abs_q"] = rep.min_abs_q;
  j["min_norm_g"] = rep.min_norm_g;
  j["violations"] = nlohmann::json::array();
  for (const RateViolation& v : rep.violations)
    j["violations"].push_back(
        {{"check", v.check}, {"k", v.k}, {"observed", v.observed}, {"bound", v.bound}});
  j["notes"] = rep.notes;
  j["passed"] = rep.all_passed();
  return j.dump(2);
}

SequenceVerdict sequence_lemma_oracle(const SequenceInstance& inst, int n_steps) {
  if (inst.delta0 < 0 || inst.a_bound <= 0)
    throw ConfigError("sequence instance requires delta0 >= 0 and A > 0");
  if (static_cast<int>(inst.c.size()) < n_steps || static_cast<int>(inst.a.size()) < n_steps)
    throw ConfigError("sequence instance shorter than requested steps");

  SequenceVerdict verdict;
  std::vector<double> delta(n_steps + 1);
  delta[0] = inst.delta0;
  for (int k = 0; k < n_steps; ++k) {
    double c = inst.c[k];
    double a = inst.a[k];
    if (c < 0 || c > 2 || a <= 0 || a > inst.a_bound)
      throw ConfigError("sequence instance violates its preconditions");
    // worst next value allowed by the recurrence: minimize over l in [0,1]
    double l = std::min(1.0, delta[k] / a);
    delta[k + 1] = delta[k] + c * (-l * delta[k] + 0.5 * a * l * l);
    if (delta[k] >= a) {
      double cap = (1.0 - c / 2.0) * delta[k];
      if (delta[k + 1] > cap + 1e-15 * (1.0 + delta[k])) {
        verdict.linear_ok = false;
        if (verdict.first_failure < 0) verdict.first_failure = k;
      }
    }
  }

  int k0 = -1;
  double c_sum = 0.0;
  for (int k = 0; k <= n_steps; ++k) {
    if (k0 < 0) {
      if (delta[k] < inst.a_bound)
        k0 = k;
      else
        continue;
    }
    if (k > k0) c_sum += inst.c[k - 1];
    double bound = 2.0 * inst.a_bound / (c_sum + 2.0);
    if (delta[k] > bound * (1 + 1e-12) + 1e-300) {
      verdict.sublinear_ok = false;
      if (verdict.first_failure < 0) verdict.first_failure = k;
    }
  }
  return verdict;
}

QstarBoundVerdict check_qstar_bound(const OuterTrace& trace, double mu, double fstar) {
  if (!(mu > 0)) throw ConfigError("Q* bound check requires mu > 0");
  QstarBoundVerdict verdict;
  for (const IterRecord& r : trace.records) {
    if (r.fallback || !std::isfinite(r.eta) || r.eta >= 1.0) continue;
    double qstar = r.q_d / (1.0 - r.eta);  // inverse of eta = 1 - Q/Q*
    double bound = mu / (mu + r.M_H) * (fstar - r.objective);
    ++verdict.checked;
    if (qstar > bound + 1e-10)
      verdict.violations.push_back({"qstar-bound", r.k, qstar, bound});
  }
  return verdict;
}

}  // namespace isqa
