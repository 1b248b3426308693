#include "isqa/subsolvers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <numeric>
#include <random>
#include <thread>
#include <vector>

namespace isqa {

Subproblem Subproblem::at(Vector x, Vector grad, const QuadraticModel& model,
                          const Regularizer& reg) {
  Subproblem sub;
  sub.psi_x = reg.value(x);
  sub.x = std::move(x);
  sub.grad = std::move(grad);
  sub.model = &model;
  sub.reg = &reg;
  return sub;
}

InnerPolicy InnerPolicy::fixed(int iterations) {
  if (iterations < 1) throw ConfigError("fixed inner policy requires T >= 1");
  InnerPolicy p;
  p.kind = Kind::Fixed;
  p.iterations = iterations;
  return p;
}

InnerPolicy InnerPolicy::increasing() {
  InnerPolicy p;
  p.kind = Kind::Increasing;
  return p;
}

InnerPolicy InnerPolicy::gap_check(double eta,
                                   std::function<double(const Subproblem&)> qstar_provider) {
  if (eta < 0 || eta >= 1) throw ConfigError("gap-check policy requires eta in [0,1)");
  InnerPolicy p;
  p.kind = Kind::GapCheck;
  p.eta = eta;
  p.qstar_provider = std::move(qstar_provider);
  return p;
}

int InnerPolicy::budget(int outer_k) const {
  switch (kind) {
    case Kind::Fixed:
      return iterations;
    case Kind::Increasing:
      return 1 + outer_k / 10;
    case Kind::GapCheck:
      return 100000;
  }
  return iterations;
}

namespace {

constexpr double kStallRel = 1e-15;

struct SparsaOptions {
  int budget = 10;
  bool stall_exit = false;
  bool gap_mode = false;
  double eta = 0.0;
  double qstar = 0.0;
};

// Core SpaRSA loop from a given start. Tracks the best iterate by Q.
InnerResult sparsa_loop(const Subproblem& sub, Vector d0, const SparsaOptions& opt) {
  const double sigma = sub.model->lower_bound();
  const double upper = sub.model->upper_bound();
  const double step_floor = 1e-12 * std::max(1.0, std::abs(upper));
  const double step_lo = std::max(sigma * 1e-3, step_floor);
  const double step_hi = std::max(upper * 1e3, step_lo * 2);

  Vector d = std::move(d0);
  Vector hd = sub.model->apply(d);
  double q = sub.objective(d);

  InnerResult res;
  res.d = d;
  res.q_value = q;

  std::deque<double> window{q};
  double alpha = std::clamp(upper, step_lo, step_hi);
  double stall_mark = q;

  for (int t = 0; t < opt.budget; ++t) {
    Vector grad_q = sub.grad + hd;
    double window_max = *std::max_element(window.begin(), window.end());
    Vector d_new, hd_new;
    double q_new = 0.0, move2 = 0.0;
    bool accepted = false;
    double a = alpha;
    for (int halvings = 0; halvings < 120; ++halvings) {
      d_new = sub.reg->prox(sub.x + d - grad_q / a, 1.0 / a) - sub.x;
      move2 = (d_new - d).squaredNorm();
      if (move2 == 0.0) break;  // prox fixed point: nothing to move
      hd_new = sub.model->apply(d_new);
      q_new = sub.grad.dot(d_new) + 0.5 * d_new.dot(hd_new) + sub.psi_shift(d_new);
      if (q_new <= window_max - 1e-4 * (a / 2.0) * move2) {
        accepted = true;
        break;
      }
      a *= 2.0;  // halve the step
    }
    if (!accepted) break;

    ++res.inner_iters;
    double bb = (d_new - d).dot(hd_new - hd) / move2;
    alpha = std::clamp(bb, step_lo, step_hi);
    d.swap(d_new);
    hd.swap(hd_new);
    q = q_new;
    window.push_back(q);
    if (window.size() > 10) window.pop_front();
    if (q < res.q_value) {
      res.q_value = q;
      res.d = d;
    }
    if (!(q > -1e300) || d.squaredNorm() > 1e24) break;  // runaway nonconvex Q
    if (opt.gap_mode && res.q_value <= (1.0 - opt.eta) * opt.qstar) break;
    if (opt.stall_exit && (t + 1) % 100 == 0) {
      if (stall_mark - res.q_value <= kStallRel * (1.0 + std::abs(res.q_value))) break;
      stall_mark = res.q_value;
    }
  }
  res.descent = res.q_value < 0.0;
  return res;
}

int thread_cap() {
  const char* env = std::getenv("ISQA_THREADS");
  if (!env || !*env) return 1;
  long v = std::strtol(env, nullptr, 10);
  if (v < 1) return 1;
  return static_cast<int>(std::min<long>(v, 64));
}

Matrix materialize(const QuadraticModel& model, const IndexRange& r) {
  Matrix B(r.size(), r.size());
  Vector acc(model.dim());
  for (Index j = r.begin; j < r.end; ++j) {
    acc.setZero();
    model.add_column(j, 1.0, acc);
    B.col(j - r.begin) = acc.segment(r.begin, r.size());
  }
  return 0.5 * (B + B.transpose());
}

struct RpcdBlockStats {
  int sweeps = 0;
  int skipped = 0;
  double q_block = 0.0;
};

// Sweeps one block; d and hd are full-length but only coordinates of `r`
// (and, through add_column on a block-diagonal model, only entries of `r`
// in hd) are touched.
RpcdBlockStats rpcd_block(const Subproblem& sub, const IndexRange& r, const InnerPolicy& policy,
                          int budget, std::uint64_t seed, bool stall_exit, Vector& d,
                          Vector& hd) {
  std::mt19937_64 rng(seed);
  std::vector<Index> perm(r.size());
  std::iota(perm.begin(), perm.end(), r.begin);

  RpcdBlockStats stats;
  const bool gap_mode = policy.kind == InnerPolicy::Kind::GapCheck;
  double qstar_block = 0.0;
  if (gap_mode) {
    Matrix blockH = materialize(*sub.model, r);
    NonnegativeIndicator nn;
    auto model = dense_symmetric_model(std::move(blockH));
    Subproblem block_sub = Subproblem::at(sub.x.segment(r.begin, r.size()),
                                          sub.grad.segment(r.begin, r.size()), *model, nn);
    qstar_block =
        policy.qstar_provider ? policy.qstar_provider(block_sub) : reference_qstar(block_sub);
  }

  auto block_q = [&]() {
    double lin = 0.0, quad = 0.0;
    for (Index i = r.begin; i < r.end; ++i) {
      lin += sub.grad[i] * d[i];
      quad += d[i] * hd[i];
    }
    return lin + 0.5 * quad;
  };

  double stall_mark = block_q();
  for (int sweep = 0; sweep < budget; ++sweep) {
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Index i : perm) {
      double hii = sub.model->diagonal(i);
      if (hii == 0.0) {
        if (sweep == 0) ++stats.skipped;
        continue;
      }
      double gi = sub.grad[i] + hd[i];
      double target = std::max(-sub.x[i], d[i] - gi / hii);
      double delta = target - d[i];
      if (delta != 0.0) {
        d[i] = target;
        sub.model->add_column(i, delta, hd);
      }
    }
    ++stats.sweeps;
    if (gap_mode) {
      stats.q_block = block_q();
      if (stats.q_block <= (1.0 - policy.eta) * qstar_block) break;
    }
    if (stall_exit && (sweep + 1) % 50 == 0) {
      double q_now = block_q();
      if (stall_mark - q_now <= kStallRel * (1.0 + std::abs(q_now))) break;
      stall_mark = q_now;
    }
  }
  stats.q_block = block_q();
  return stats;
}

InnerResult rpcd_run(const Subproblem& sub, const InnerPolicy& policy, int outer_k,
                     std::uint64_t seed, bool stall_exit) {
  if (dynamic_cast<const NonnegativeIndicator*>(sub.reg) == nullptr)
    throw ConfigError("rpcd requires the nonnegativity-indicator regularizer");
  if (!sub.model->has_diagonal())
    throw ConfigError("rpcd requires per-coordinate diagonal access to the model");
  if (!(sub.reg->value(sub.x) < kInf))
    throw ConfigError("rpcd requires a feasible base point");

  const Index n = sub.dim();
  const int budget = policy.budget(outer_k);
  std::vector<IndexRange> ranges = sub.model->blocks();
  Vector d = Vector::Zero(n);
  Vector hd = Vector::Zero(n);
  std::vector<RpcdBlockStats> stats(ranges.size());

  const int workers = std::min<int>(thread_cap(), static_cast<int>(ranges.size()));
  if (workers <= 1) {
    for (size_t b = 0; b < ranges.size(); ++b)
      stats[b] = rpcd_block(sub, ranges[b], policy, budget, seed + b, stall_exit, d, hd);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        try {
          for (size_t b = w; b < ranges.size(); b += workers)
            stats[b] = rpcd_block(sub, ranges[b], policy, budget, seed + b, stall_exit, d, hd);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }

  InnerResult res;
  res.q_value = sub.objective(d);
  res.d = std::move(d);
  for (const RpcdBlockStats& s : stats) {
    res.inner_iters = std::max(res.inner_iters, s.sweeps);
    res.skipped_coordinates += s.skipped;
  }
  res.descent = res.q_value < 0.0;
  if (policy.kind == InnerPolicy::Kind::GapCheck) {
    Subproblem whole = sub;
    double qstar =
        policy.qstar_provider ? policy.qstar_provider(whole) : reference_qstar(whole);
    if (qstar < 0) res.measured_eta = 1.0 - res.q_value / qstar;
  }
  return res;
}

void consider_candidate(const Subproblem& sub, const Vector& d, InnerResult& best) {
  double q = sub.objective(d);
  if (std::isfinite(q) && q < best.q_value) {
    best.q_value = q;
    best.d = d;
    best.descent = q < 0.0;
  }
}

// Active-set refinement against the densified model. Every candidate is
// feasible, so the best Q only improves; KKT stationarity is reached in a
// handful of rounds from a warm budgeted start.
void polish_l1(const Subproblem& sub, double weight, const Matrix& H, InnerResult& best) {
  const Index n = sub.dim();
  const double scale = std::max({1.0, sub.grad.lpNorm<Eigen::Infinity>(), weight});
  Vector u = sub.x + best.d;
  std::vector<int> prev_state(n, 99);
  for (int round = 0; round < 40; ++round) {
    Vector r = sub.grad + H * (u - sub.x);
    std::vector<Index> free;
    Vector sign = Vector::Zero(n);
    std::vector<int> state(n, 0);
    for (Index i = 0; i < n; ++i) {
      if (u[i] != 0.0) {
        sign[i] = u[i] > 0 ? 1.0 : -1.0;
      } else if (std::abs(r[i]) > weight * (1 + 1e-12) + 1e-15 * scale) {
        sign[i] = r[i] > 0 ? -1.0 : 1.0;
      }
      if (sign[i] != 0.0) {
        free.push_back(i);
        state[i] = sign[i] > 0 ? 1 : -1;
      }
    }
    Vector u_next = Vector::Zero(n);
    if (!free.empty()) {
      const Index f = static_cast<Index>(free.size());
      Matrix Hff(f, f);
      Vector rhs(f);
      for (Index a = 0; a < f; ++a) {
        for (Index b = 0; b < f; ++b) Hff(a, b) = H(free[a], free[b]);
        // g_F + H_FF d_F + H_FZ (-x_Z) + w*sign_F = 0 with u_Z = 0
        double coupling = 0.0;
        for (Index j = 0; j < n; ++j)
          if (state[j] == 0) coupling += H(free[a], j) * (-sub.x[j]);
        rhs[a] = -sub.grad[free[a]] - coupling - weight * sign[free[a]];
      }
      Vector df = Hff.ldlt().solve(rhs);
      for (Index a = 0; a < f; ++a) {
        double ui = sub.x[free[a]] + df[a];
        u_next[free[a]] = (ui * sign[free[a]] > 0) ? ui : 0.0;
      }
    }
    u = u_next;
    consider_candidate(sub, u - sub.x, best);
    if (state == prev_state) break;
    prev_state = state;
  }
}

void polish_nonneg(const Subproblem& sub, const Matrix& H, InnerResult& best) {
  const Index n = sub.dim();
  const double scale = std::max(1.0, sub.grad.lpNorm<Eigen::Infinity>());
  Vector u = (sub.x + best.d).cwiseMax(0.0);
  std::vector<int> prev_state(n, 99);
  for (int round = 0; round < 40; ++round) {
    Vector r = sub.grad + H * (u - sub.x);
    std::vector<Index> free;
    std::vector<int> state(n, 0);
    for (Index i = 0; i < n; ++i) {
      if (u[i] > 0.0 || r[i] < -1e-15 * scale) {
        free.push_back(i);
        state[i] = 1;
      }
    }
    Vector u_next = Vector::Zero(n);
    if (!free.empty()) {
      const Index f = static_cast<Index>(free.size());
      Matrix Hff(f, f);
      Vector rhs(f);
      for (Index a = 0; a < f; ++a) {
        for (Index b = 0; b < f; ++b) Hff(a, b) = H(free[a], free[b]);
        double coupling = 0.0;
        for (Index j = 0; j < n; ++j)
          if (state[j] == 0) coupling += H(free[a], j) * (-sub.x[j]);
        rhs[a] = -sub.grad[free[a]] - coupling;
      }
      Vector df = Hff.ldlt().solve(rhs);
      for (Index a = 0; a < f; ++a)
        u_next[free[a]] = std::max(0.0, sub.x[free[a]] + df[a]);
    }
    u = u_next;
    consider_candidate(sub, u - sub.x, best);
    if (state == prev_state) break;
    prev_state = state;
  }
}

}  // namespace

InnerResult sparsa_solve(const Subproblem& sub, const InnerPolicy& policy, int outer_k,
                         std::uint64_t /*seed*/) {
  SparsaOptions opt;
  opt.budget = policy.budget(outer_k);
  if (policy.kind == InnerPolicy::Kind::GapCheck) {
    opt.gap_mode = true;
    opt.eta = policy.eta;
    opt.qstar = policy.qstar_provider ? policy.qstar_provider(sub) : reference_qstar(sub);
  }
  InnerResult res = sparsa_loop(sub, Vector::Zero(sub.dim()), opt);
  if (opt.gap_mode && opt.qstar < 0) res.measured_eta = 1.0 - res.q_value / opt.qstar;
  return res;
}

InnerResult rpcd_solve(const Subproblem& sub, const InnerPolicy& policy, int outer_k,
                       std::uint64_t seed) {
  return rpcd_run(sub, policy, outer_k, seed, /*stall_exit=*/false);
}

InnerResult reference_solve(const Subproblem& sub) {
  if (!sub.strongly_convex())
    throw ConfigError("reference solve requires a strongly convex subproblem");
  const bool nonneg = dynamic_cast<const NonnegativeIndicator*>(sub.reg) != nullptr;

  InnerResult best;
  if (nonneg && sub.model->has_diagonal()) {
    best = rpcd_run(sub, InnerPolicy::fixed(20000), 0, 0x5eedULL, /*stall_exit=*/true);
  } else {
    SparsaOptions opt;
    opt.budget = 20000;
    opt.stall_exit = true;
    best = sparsa_loop(sub, Vector::Zero(sub.dim()), opt);
  }

  if (sub.dim() <= 600) {
    Matrix H = materialize(*sub.model, {0, sub.dim()});
    if (const auto* l1 = dynamic_cast<const L1Norm*>(sub.reg)) {
      if (l1->weight() > 0)
        polish_l1(sub, l1->weight(), H, best);
      else
        consider_candidate(sub, Vector(H.ldlt().solve(-sub.grad)), best);
    } else if (dynamic_cast<const NonnegativeIndicator*>(sub.reg) != nullptr) {
      polish_nonneg(sub, H, best);
    } else if (dynamic_cast<const ZeroRegularizer*>(sub.reg) != nullptr) {
      consider_candidate(sub, Vector(H.ldlt().solve(-sub.grad)), best);
    }
  }
  return best;
}

double reference_qstar(const Subproblem& sub) { return reference_solve(sub).q_value; }

}  // namespace isqa
