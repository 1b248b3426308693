#include <cmath>
#include <cstdlib>

#include "doctest.h"
#include "isqa/subsolvers.hpp"
#include "support.hpp"

using namespace isqa;
using testsupport::random_vector;

namespace {

Subproblem make_l1_sub(const Vector& x, const Vector& g, const QuadraticModel& m,
                       const L1Norm& reg) {
  return Subproblem::at(x, g, m, reg);
}

}  // namespace

TEST_CASE("sparsa with identity metric and no regularizer is exact in one step") {
  auto gen = testsupport::rng(21);
  Vector g = random_vector(6, gen);
  auto m = identity_model(1.0, 6);
  ZeroRegularizer zero;
  Subproblem sub = Subproblem::at(Vector::Zero(6), g, *m, zero);
  InnerResult res = sparsa_solve(sub, InnerPolicy::fixed(1), 0, 1);
  CHECK(res.descent);
  CHECK((res.d + g).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(res.q_value == doctest::Approx(-0.5 * g.squaredNorm()).epsilon(1e-14));
}

TEST_CASE("Q(0) is exactly zero") {
  auto gen = testsupport::rng(22);
  L1Norm reg(1.0);
  auto m = dense_symmetric_model(testsupport::random_symmetric(3, 0.5, 2, 3));
  Subproblem sub = make_l1_sub(random_vector(3, gen), random_vector(3, gen), *m, reg);
  CHECK(sub.objective(Vector::Zero(3)) == 0.0);
}

TEST_CASE("sparsa on 2-dim l1 subproblems meets the enumeration optimum") {
  auto gen = testsupport::rng(23);
  L1Norm reg(1.0);
  for (int rep = 0; rep < 30; ++rep) {
    Matrix h = testsupport::random_symmetric(2, 0.4, 3.0, 100 + rep);
    Vector diag = h.diagonal();
    auto m = dense_symmetric_model(h);
    Vector x = random_vector(2, gen);
    Vector g = random_vector(2, gen, 2.0);
    Subproblem sub = make_l1_sub(x, g, *m, reg);

    double qstar = testsupport::l1_qstar_enumeration(x, g, h, 1.0);
    InnerResult res = sparsa_solve(sub, InnerPolicy::fixed(40), 0, 5);
    CHECK(res.q_value >= qstar - 1e-10);
    if (qstar < -1e-12) {
      double eta = 1.0 - res.q_value / qstar;
      CHECK(eta >= -1e-10);
      CHECK(eta < 1.0);
    }
  }
}

TEST_CASE("more inner iterations never raise the measured inexactness") {
  auto gen = testsupport::rng(24);
  L1Norm reg(1.0);
  Matrix h = testsupport::random_symmetric(6, 0.5, 4.0, 200);
  auto m = dense_symmetric_model(h);
  Vector x = random_vector(6, gen);
  Vector g = random_vector(6, gen, 2.0);
  Subproblem sub = make_l1_sub(x, g, *m, reg);
  double qstar = reference_qstar(sub);
  REQUIRE(qstar < 0);
  double prev = 2.0;
  for (int t : {5, 10, 20, 40}) {
    InnerResult res = sparsa_solve(sub, InnerPolicy::fixed(t), 0, 6);
    double eta = 1.0 - res.q_value / qstar;
    CHECK(eta <= prev + 1e-12);
    prev = eta;
  }
}

TEST_CASE("sparsa gap decays linearly on strongly convex subproblems") {
  auto gen = testsupport::rng(25);
  L1Norm reg(1.0);
  Matrix h = testsupport::random_symmetric(5, 1.0, 5.0, 300);
  auto m = dense_symmetric_model(h);
  Subproblem sub = make_l1_sub(random_vector(5, gen), random_vector(5, gen, 3.0), *m, reg);
  double qstar = reference_qstar(sub);
  REQUIRE(qstar < 0);
  // every prefix gap must sit below a geometric envelope (1 - tau)^t with
  // a strictly positive fitted tau; per-step plateaus are fine
  const double gap0 = -qstar;
  double worst_rate = 0.0;
  for (int t = 1; t <= 15; ++t) {
    InnerResult res = sparsa_solve(sub, InnerPolicy::fixed(t), 0, 7);
    double gap = res.q_value - qstar;
    if (gap <= 1e-13 * gap0) break;
    worst_rate = std::max(worst_rate, std::pow(gap / gap0, 1.0 / t));
  }
  CHECK(worst_rate < 1.0);
}

TEST_CASE("gap-check policy enforces the multiplicative condition") {
  auto gen = testsupport::rng(26);
  L1Norm reg(1.0);
  Matrix h = testsupport::random_symmetric(4, 0.8, 3.0, 400);
  auto m = dense_symmetric_model(h);
  Subproblem sub = make_l1_sub(random_vector(4, gen), random_vector(4, gen, 2.0), *m, reg);
  const double eta = 0.25;
  InnerResult res = sparsa_solve(sub, InnerPolicy::gap_check(eta), 0, 8);
  REQUIRE(res.measured_eta.has_value());
  CHECK(*res.measured_eta <= eta + 1e-9);
}

TEST_CASE("rpcd basics") {
  NonnegativeIndicator nn;

  SUBCASE("one dimension lands on the constrained minimizer in one sweep") {
    auto m = identity_model(2.0, 1);
    Vector x(1), g(1);
    x << 0.5;
    g << 3.0;  // unconstrained minimizer d = -1.5 violates d >= -0.5
    Subproblem sub = Subproblem::at(x, g, *m, nn);
    InnerResult res = rpcd_solve(sub, InnerPolicy::fixed(1), 0, 9);
    CHECK(res.d[0] == doctest::Approx(-0.5));
    g << 1.0;  // interior minimizer d = -0.5 exactly at the bound
    Subproblem sub2 = Subproblem::at(x, g, *m, nn);
    res = rpcd_solve(sub2, InnerPolicy::fixed(1), 0, 9);
    CHECK(res.d[0] == doctest::Approx(-0.5));
  }

  SUBCASE("diagonal model: one sweep is exact for any permutation") {
    auto gen = testsupport::rng(27);
    std::vector<Matrix> blocks;
    std::vector<IndexRange> ranges;
    for (Index i = 0; i < 6; ++i) {
      blocks.push_back(Matrix::Constant(1, 1, 0.5 + i));
      ranges.push_back({i, i + 1});
    }
    auto m = block_diagonal_model(blocks, ranges);
    Vector x = random_vector(6, gen).cwiseAbs();
    Vector g = random_vector(6, gen, 2.0);
    Subproblem sub = Subproblem::at(x, g, *m, nn);
    InnerResult a = rpcd_solve(sub, InnerPolicy::fixed(1), 0, 1);
    InnerResult b = rpcd_solve(sub, InnerPolicy::fixed(1), 0, 999);
    CHECK((a.d - b.d).norm() == 0.0);
    for (Index i = 0; i < 6; ++i) {
      double want = std::max(-x[i], -g[i] / (0.5 + i));
      CHECK(a.d[i] == doctest::Approx(want).epsilon(1e-14));
    }
  }

  SUBCASE("5-dim dual toy reaches the reference optimum") {
    auto ds = testsupport::synthetic_classification(5, 3, 0.8, 500);
    auto blocks = dual_gram_blocks(ds, 1.0, {{0, 5}});
    auto m = block_diagonal_model(std::move(blocks), {{0, 5}});
    Vector x = Vector::Zero(5);
    Vector g = Vector::Constant(5, -1.0);
    Subproblem sub = Subproblem::at(x, g, *m, nn);
    double qstar = reference_qstar(sub);
    InnerResult res = rpcd_solve(sub, InnerPolicy::fixed(200), 0, 10);
    CHECK(res.q_value == doctest::Approx(qstar).epsilon(1e-8));
    double eta = 1.0 - res.q_value / qstar;
    CHECK(std::abs(eta) <= 1e-8);
  }

  SUBCASE("zero diagonal coordinates are skipped and reported") {
    Matrix block(2, 2);
    block << 0, 0, 0, 1;
    auto m = block_diagonal_model({block}, {{0, 2}});
    Vector x = Vector::Ones(2);
    Vector g(2);
    g << 5.0, 1.0;
    NonnegativeIndicator nn2;
    Subproblem sub2 = Subproblem::at(x, g, *m, nn2);
    InnerResult res = rpcd_solve(sub2, InnerPolicy::fixed(3), 0, 11);
    CHECK(res.skipped_coordinates == 1);
    CHECK(res.d[0] == 0.0);
  }

  SUBCASE("wrong regularizer rejected") {
    L1Norm l1(1.0);
    auto m = identity_model(1.0, 2);
    Subproblem sub = Subproblem::at(Vector::Zero(2), Vector::Ones(2), *m, l1);
    CHECK_THROWS_AS(rpcd_solve(sub, InnerPolicy::fixed(1), 0, 1), ConfigError);
  }
}

TEST_CASE("rpcd honors the gap-check and increasing policies") {
  auto ds = testsupport::synthetic_classification(10, 4, 0.8, 550);
  std::vector<IndexRange> ranges = column_blocks(10, 2);
  auto m = block_diagonal_model(dual_gram_blocks(ds, 1.0, ranges), ranges);
  NonnegativeIndicator nn;
  Subproblem sub = Subproblem::at(Vector::Zero(10), Vector::Constant(10, -1.0), *m, nn);

  InnerResult res = rpcd_solve(sub, InnerPolicy::gap_check(0.5), 0, 3);
  REQUIRE(res.measured_eta.has_value());
  CHECK(*res.measured_eta <= 0.5 + 1e-9);

  InnerPolicy inc = InnerPolicy::increasing();
  for (int k : {0, 9, 10, 25, 70}) {
    InnerResult r = rpcd_solve(sub, inc, k, 3);
    CHECK(r.inner_iters == 1 + k / 10);
  }
}

TEST_CASE("per-block solves are deterministic under threading") {
  auto ds = testsupport::synthetic_classification(12, 5, 0.7, 600);
  std::vector<IndexRange> ranges = column_blocks(12, 4);
  auto m = block_diagonal_model(dual_gram_blocks(ds, 1.0, ranges), ranges);
  NonnegativeIndicator nn;
  Subproblem sub = Subproblem::at(Vector::Zero(12), Vector::Constant(12, -1.0), *m, nn);

  InnerResult sequential = rpcd_solve(sub, InnerPolicy::fixed(7), 2, 12);
  setenv("ISQA_THREADS", "3", 1);
  InnerResult threaded = rpcd_solve(sub, InnerPolicy::fixed(7), 2, 12);
  unsetenv("ISQA_THREADS");
  CHECK((sequential.d - threaded.d).norm() == 0.0);
  CHECK(sequential.q_value == threaded.q_value);
}

TEST_CASE("reference solver") {
  auto gen = testsupport::rng(28);

  SUBCASE("identity metric without regularizer") {
    Vector g = random_vector(5, gen);
    auto m = identity_model(1.0, 5);
    ZeroRegularizer zero;
    Subproblem sub = Subproblem::at(Vector::Zero(5), g, *m, zero);
    CHECK(reference_qstar(sub) == doctest::Approx(-0.5 * g.squaredNorm()).epsilon(1e-12));
  }

  SUBCASE("2-dim l1 agrees with enumeration to 1e-10") {
    L1Norm reg(1.0);
    for (int rep = 0; rep < 25; ++rep) {
      Matrix h = testsupport::random_symmetric(2, 0.3, 4.0, 700 + rep);
      auto m = dense_symmetric_model(h);
      Vector x = random_vector(2, gen);
      Vector g = random_vector(2, gen, 2.0);
      Subproblem sub = make_l1_sub(x, g, *m, reg);
      double want = testsupport::l1_qstar_enumeration(x, g, h, 1.0);
      CHECK(reference_qstar(sub) == doctest::Approx(want).epsilon(1e-10));
    }
  }

  SUBCASE("reference is a lower bound for budgeted solves") {
    L1Norm reg(1.0);
    Matrix h = testsupport::random_symmetric(5, 0.5, 3.0, 800);
    auto m = dense_symmetric_model(h);
    Subproblem sub = make_l1_sub(random_vector(5, gen), random_vector(5, gen, 2.0), *m, reg);
    double qstar = reference_qstar(sub);
    for (int t : {1, 3, 9, 27}) {
      InnerResult res = sparsa_solve(sub, InnerPolicy::fixed(t), 0, 13);
      CHECK(qstar <= res.q_value + 1e-12);
    }
  }

  SUBCASE("nonconvex subproblems are rejected") {
    Matrix h(2, 2);
    h << -1, 0, 0, 1;
    auto m = dense_symmetric_model(h);
    L1Norm reg(1.0);
    Subproblem sub = make_l1_sub(Vector::Zero(2), Vector::Ones(2), *m, reg);
    CHECK_FALSE(sub.strongly_convex());
    CHECK_THROWS_AS(reference_qstar(sub), ConfigError);
  }
}
