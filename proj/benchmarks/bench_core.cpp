#include <benchmark/benchmark.h>

#include <random>
#include <sstream>

#include "isqa/outer.hpp"
#include "isqa/trace_io.hpp"

namespace {

using namespace isqa;

Dataset synthetic(Index rows, Index cols, double density, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::bernoulli_distribution keep(density);
  Dataset ds;
  SparseMatrix& m = ds.features;
  m.n_rows = rows;
  m.n_cols = cols;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (!keep(gen)) continue;
      m.col_indices.push_back(j);
      m.values.push_back(unif(gen));
    }
    if (m.row_offsets.back() == m.nnz()) {
      m.col_indices.push_back(i % cols);
      m.values.push_back(1.0);
    }
    m.row_offsets.push_back(m.nnz());
    ds.labels.push_back(unif(gen) >= 0 ? 1.0 : -1.0);
  }
  return ds;
}

void BM_ParseLibsvm(benchmark::State& state) {
  std::string text = write_libsvm(synthetic(state.range(0), 100, 0.2, 1));
  for (auto _ : state) {
    Dataset ds = parse_libsvm(text);
    benchmark::DoNotOptimize(ds.features.nnz());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<int64_t>(text.size()));
}
BENCHMARK(BM_ParseLibsvm)->Arg(100)->Arg(1000);

void BM_LbfgsApply(benchmark::State& state) {
  const Index dim = state.range(0);
  std::mt19937_64 gen(2);
  std::normal_distribution<double> dist;
  LbfgsState lbfgs(dim, 10);
  for (int p = 0; p < 12; ++p) {
    Vector s(dim), noise(dim);
    for (Index i = 0; i < dim; ++i) {
      s[i] = dist(gen);
      noise[i] = dist(gen);
    }
    lbfgs.update(s, Vector(s + 0.1 * noise));
  }
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = dist(gen);
  auto model = lbfgs.model();
  for (auto _ : state) {
    benchmark::DoNotOptimize(model->apply(v).sum());
  }
}
BENCHMARK(BM_LbfgsApply)->Arg(128)->Arg(1024);

void BM_SparsaSubproblem(benchmark::State& state) {
  const Index dim = 64;
  std::mt19937_64 gen(3);
  std::normal_distribution<double> dist;
  LbfgsState lbfgs(dim, 10);
  for (int p = 0; p < 10; ++p) {
    Vector s(dim), noise(dim);
    for (Index i = 0; i < dim; ++i) {
      s[i] = dist(gen);
      noise[i] = dist(gen);
    }
    lbfgs.update(s, Vector(s + 0.1 * noise));
  }
  auto model = lbfgs.model();
  L1Norm reg(1.0);
  Vector x(dim), g(dim);
  for (Index i = 0; i < dim; ++i) {
    x[i] = dist(gen);
    g[i] = dist(gen);
  }
  Subproblem sub = Subproblem::at(x, g, *model, reg);
  InnerPolicy policy = InnerPolicy::fixed(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    InnerResult res = sparsa_solve(sub, policy, 0, 1);
    benchmark::DoNotOptimize(res.q_value);
  }
}
BENCHMARK(BM_SparsaSubproblem)->Arg(5)->Arg(30);

void BM_OuterIteration(benchmark::State& state) {
  auto ds = std::make_shared<Dataset>(synthetic(200, 50, 0.3, 4));
  CompositeProblem p = make_l1_logreg(ds, 1.0);
  for (auto _ : state) {
    LbfgsModelSource models(50, 10);
    OuterConfig cfg;
    cfg.max_outer = 10;
    cfg.stop_tol = 1e-14;
    cfg.record_time = false;
    OuterTrace trace = solve_linesearch(
        p, models,
        [](const Subproblem& sub, const InnerPolicy& pol, int k, std::uint64_t s) {
          return sparsa_solve(sub, pol, k, s);
        },
        InnerPolicy::fixed(10), cfg, Vector::Zero(50));
    benchmark::DoNotOptimize(trace.final_objective);
  }
}
BENCHMARK(BM_OuterIteration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
