#include <cmath>

#include "doctest.h"
#include "isqa/diagnostics.hpp"
#include "isqa/trace_io.hpp"
#include "support.hpp"
#include "json.hpp"

using namespace isqa;
using testsupport::random_vector;

namespace {

InnerSolver sparsa = [](const Subproblem& sub, const InnerPolicy& p, int k, std::uint64_t s) {
  return sparsa_solve(sub, p, k, s);
};

}  // namespace

TEST_CASE("stationarity measure") {
  SUBCASE("closed form for the l1 regularizer") {
    auto ds = std::make_shared<Dataset>(testsupport::synthetic_classification(10, 4, 0.7, 4001));
    CompositeProblem p = make_l1_logreg(ds, 1.0);
    auto gen = testsupport::rng(41);
    Vector x = random_vector(4, gen);
    Vector g = p.smooth->gradient(x);
    Vector got = prox_grad_stationarity(p, x);
    for (Index i = 0; i < 4; ++i) {
      double v = x[i] - g[i];
      double soft = std::abs(v) > 1 ? (v > 0 ? v - 1 : v + 1) : 0.0;
      CHECK(got[i] == doctest::Approx(soft - x[i]).epsilon(1e-14));
    }
  }

  SUBCASE("zero exactly at stationary points and only there") {
    // 1-d problem f = (x - a)^2/2, psi = w|x|; minimizer soft(a, w)
    const double a = 2.0, w = 0.6;
    Matrix b = Matrix::Identity(1, 1);
    Vector c(1);
    c << -a;
    CompositeProblem p = make_indefinite_quadratic_l1(b, c, w);
    Vector xstar(1);
    xstar << a - w;
    CHECK(prox_grad_stationarity(p, xstar).norm() == 0.0);
    Vector off(1);
    off << a;
    CHECK(prox_grad_stationarity(p, off).norm() > 1e-3);
    // interior stationary point of the unregularized problem
    CompositeProblem plain = make_indefinite_quadratic_l1(b, c, 0.0);
    Vector origin_opt(1);
    origin_opt << a;
    CHECK(prox_grad_stationarity(plain, origin_opt).norm() == 0.0);
  }
}

TEST_CASE("measured inexactness") {
  auto gen = testsupport::rng(42);
  L1Norm reg(1.0);
  Matrix h = testsupport::random_symmetric(3, 0.5, 2.0, 4100);
  auto m = dense_symmetric_model(h);
  Subproblem sub = Subproblem::at(random_vector(3, gen), random_vector(3, gen, 2.0), *m, reg);
  InnerResult ref = reference_solve(sub);
  REQUIRE(ref.q_value < 0);

  CHECK(measure_eta(sub, ref.d, ref.q_value) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(measure_eta(sub, Vector::Zero(3), ref.q_value) == doctest::Approx(1.0));
  CHECK_THROWS_AS(measure_eta(sub, ref.d, 0.0), ConfigError);
  CHECK_THROWS_AS(measure_eta(sub, ref.d, 1.0), ConfigError);

  double prev = 2.0;
  for (int t : {5, 10, 25}) {
    InnerResult res = sparsa_solve(sub, InnerPolicy::fixed(t), 0, 1);
    double eta = measure_eta(sub, res.d, ref.q_value);
    CHECK(eta < 1.0);
    CHECK(eta <= prev + 1e-12);
    prev = eta;
  }
}

TEST_CASE("subproblem optimum dominated by the model eigenvalue floor") {
  // Q(d*) <= -0.5 sigma ||d*||^2 for positive definite models
  auto gen = testsupport::rng(43);
  L1Norm reg(1.0);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix h = testsupport::random_symmetric(4, 0.3, 3.0, 4200 + rep);
    auto m = dense_symmetric_model(h);
    Subproblem sub = Subproblem::at(random_vector(4, gen), random_vector(4, gen, 2.0), *m, reg);
    InnerResult ref = reference_solve(sub);
    CHECK(ref.q_value <= -0.5 * m->lower_bound() * ref.d.squaredNorm() + 1e-8);
  }
}

TEST_CASE("quadratic-bound check on a 1-d closed form") {
  // f = mu x^2 / 2, psi = 0, H = h I: Q* = -mu^2 x^2 / (2h) must be below
  // mu/(mu+h) * (F* - F(x)) = -mu^2 x^2 / (2 (mu+h))
  auto gen = testsupport::rng(44);
  std::uniform_real_distribution<double> unif(0.1, 5.0);
  for (int rep = 0; rep < 200; ++rep) {
    double mu = unif(gen), h = unif(gen), x = unif(gen) - 2.5;
    double qstar = -mu * mu * x * x / (2 * h);
    double bound = mu / (mu + h) * (0.0 - 0.5 * mu * x * x);
    CHECK(qstar <= bound + 1e-12);
  }
}

TEST_CASE("certify_rates on exact proximal gradient for a strongly convex quadratic") {
  // eigenvalues in [mu, L]; identity model at L with gamma = 1 gives the
  // classical 1 - mu/(mu + L) cap
  const Index n = 6;
  const double mu = 0.5, big_l = 4.0;
  Matrix b = testsupport::random_symmetric(n, mu, big_l, 4300);
  auto gen = testsupport::rng(45);
  CompositeProblem p = make_indefinite_quadratic_l1(b, random_vector(n, gen), 0.0);
  Vector xstar = b.ldlt().solve(-p.smooth->gradient(Vector::Zero(n)));
  double fstar = p.value(xstar);

  FixedModelSource models(identity_model(big_l * 1.05, n));
  OuterConfig cfg;
  cfg.algorithm = OuterAlgorithm::ModifyH2;
  cfg.sufficient_decrease = 1.0;
  cfg.max_outer = 60;
  cfg.stop_tol = 1e-9;
  cfg.measure_eta = true;
  cfg.fstar = fstar;
  cfg.rel_stop = 1e-9;

  CertificationProbe probe(xstar);
  OuterTrace trace = solve_modify_h(p, models, sparsa, InnerPolicy::fixed(3000), cfg, 2,
                                    Vector::Constant(n, 2.0), probe.observer());

  RateInputs in;
  in.lipschitz = p.smooth->lipschitz_estimate();
  in.mu = mu;
  in.fstar = fstar;
  in.unit_step = true;
  in.hquad_to_opt = probe.hquad_to_opt();
  in.dist_to_opt = probe.dist_to_opt();
  RateReport rep = certify_rates(trace, in);
  for (const auto& v : rep.violations) MESSAGE(v.check, " at ", v.k, ": ", v.observed, " vs ", v.bound);
  CHECK(rep.all_passed());
  REQUIRE(!rep.contraction_cap.empty());
  // eta ~ 0: every cap is at most the classical rate and the observed
  // ratios sit below the caps
  for (size_t k = 0; k < trace.records.size(); ++k) {
    if (!std::isfinite(rep.contraction_cap[k])) continue;
    CHECK(rep.contraction_cap[k] <=
          1 - mu / (mu + trace.records[k].M_H) + 1e-6);
  }
}

TEST_CASE("rate report serializes with stable field names") {
  OuterTrace trace;
  trace.config.sufficient_decrease = 0.5;
  IterRecord r;
  r.k = 0;
  r.objective = 2.0;
  r.q_d = -0.5;
  r.delta = -0.6;
  r.alpha = 1.0;
  r.sigma_H = 1.0;
  r.M_H = 2.0;
  r.norm_G = 0.3;
  trace.records.push_back(r);
  trace.final_objective = 1.5;

  RateInputs in;
  in.fstar = 1.0;
  in.mu = 0.0;
  RateReport rep = certify_rates(trace, in);
  auto j = nlohmann::json::parse(rate_report_json(rep));
  for (const char* key :
       {"constants", "objective_gap", "contraction", "contraction_cap", "early_linear",
        "min_abs_q", "min_norm_g", "violations", "notes", "passed"})
    CHECK(j.contains(key));
  for (const char* key : {"mu", "lipschitz", "fstar", "sigma_min", "m_max", "eta_bar",
                          "min_alpha", "r0_estimate", "k0_estimate"})
    CHECK(j["constants"].contains(key));
}

TEST_CASE("sequence lemma oracle") {
  SUBCASE("no progress keeps delta constant and the tail bound holds") {
    SequenceInstance inst;
    inst.delta0 = 0.5;
    inst.a_bound = 1.0;
    inst.c.assign(50, 0.0);
    inst.a.assign(50, 1.0);
    SequenceVerdict v = sequence_lemma_oracle(inst, 50);
    CHECK(v.ok());
  }
  SUBCASE("direct substitution halves delta") {
    SequenceInstance inst;
    inst.delta0 = 2.0;
    inst.a_bound = 1.0;
    inst.c.assign(5, 1.0);
    inst.a.assign(5, 1.0);
    SequenceVerdict v = sequence_lemma_oracle(inst, 5);
    CHECK(v.ok());
  }
  SUBCASE("1000 random instances satisfy both conclusions") {
    auto gen = testsupport::rng(46);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int failures = 0;
    for (int rep = 0; rep < 1000; ++rep) {
      SequenceInstance inst;
      inst.a_bound = 0.1 + 5.0 * unif(gen);
      inst.delta0 = 10.0 * inst.a_bound * unif(gen);
      const int steps = 80;
      for (int k = 0; k < steps; ++k) {
        inst.c.push_back(unif(gen));
        inst.a.push_back(inst.a_bound * std::max(1e-12, unif(gen)));
      }
      SequenceVerdict v = sequence_lemma_oracle(inst, steps);
      failures += v.ok() ? 0 : 1;
    }
    CHECK(failures == 0);
  }
  SUBCASE("invalid instances rejected") {
    SequenceInstance inst;
    inst.delta0 = -1;
    inst.c.assign(1, 0.5);
    inst.a.assign(1, 0.5);
    CHECK_THROWS_AS(sequence_lemma_oracle(inst, 1), ConfigError);
  }
}

TEST_CASE("qstar bound check on an instrumented strongly convex run") {
  auto ds = std::make_shared<Dataset>(testsupport::synthetic_classification(30, 8, 0.6, 4400));
  const double C = 1.0;
  CompositeProblem p = make_squared_hinge_dual(ds, C);
  std::vector<IndexRange> ranges = column_blocks(30, 4);
  FixedModelSource models(block_diagonal_model(dual_gram_blocks(*ds, C, ranges), ranges));
  InnerSolver rpcd = [](const Subproblem& sub, const InnerPolicy& pol, int k, std::uint64_t s) {
    return rpcd_solve(sub, pol, k, s);
  };

  OuterConfig ref_cfg;
  ref_cfg.algorithm = OuterAlgorithm::ExactLineSearch;
  ref_cfg.max_outer = 2000;
  ref_cfg.stop_tol = 1e-12;
  OuterTrace ref = solve_exact_linesearch(p, models, rpcd, InnerPolicy::fixed(30), ref_cfg,
                                          Vector::Zero(30));

  OuterConfig cfg = ref_cfg;
  cfg.max_outer = 60;
  cfg.stop_tol = 1e-9;
  cfg.measure_eta = true;
  cfg.fstar = ref.final_objective;
  cfg.rel_stop = 1e-7;
  OuterTrace trace = solve_exact_linesearch(p, models, rpcd, InnerPolicy::fixed(10), cfg,
                                            Vector::Zero(30));
  QstarBoundVerdict verdict = check_qstar_bound(trace, 1.0 / (2 * C), ref.final_objective);
  CHECK(verdict.checked >= 5);
  for (const auto& v : verdict.violations)
    MESSAGE(v.check, " at ", v.k, ": ", v.observed, " vs ", v.bound);
  CHECK(verdict.ok());
}

TEST_CASE("trace csv format") {
  OuterTrace trace;
  IterRecord r;
  r.k = 0;
  r.objective = 1.0 / 3.0;
  r.delta = -0.25;
  r.q_d = -0.125;
  r.alpha = 0.5;
  r.mods = 2;
  r.inner_iters = 7;
  r.eta = 0.125;
  r.norm_G = 0.75;
  r.sigma_H = 1.0;
  r.M_H = 2.0;
  r.time_s = 0.0;
  trace.records.push_back(r);
  std::string csv = trace_csv(trace);
  auto nl = csv.find('\n');
  CHECK(csv.substr(0, nl) == std::string(kTraceHeader));
  CHECK(csv.substr(nl + 1) ==
        "0,0.33333333333333331,-0.25,-0.125,0.5,2,7,0.125,0.75,1,2,0\n");
}
