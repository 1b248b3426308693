// Command-line driver: runs one configured solve (or a sweep over inner
// iteration budgets), writing the iteration trace as CSV and an optional
// rate-certification report as JSON.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "CLI11.hpp"
#include "json.hpp"

#include "isqa/diagnostics.hpp"
#include "isqa/trace_io.hpp"

namespace {

using namespace isqa;

struct CliOptions {
  std::string mode = "run";
  std::string problem = "l1lr";
  std::string data_path;
  long features_override = 0;
  double cost = 1.0;  // C
  long dim = 30;
  double l1_weight = 1.0;
  std::string algorithm = "ls";
  std::string model = "lbfgs:10";
  std::string inner = "sparsa";
  std::string inner_policy = "fixed:10";
  double beta = 0.5;
  double gamma = 1e-4;
  int max_outer = 1000;
  double stop_tol = 1e-8;
  std::uint64_t seed = 0;
  double fstar = std::numeric_limits<double>::quiet_NaN();
  double rel_tol = 0.0;
  double mu = std::numeric_limits<double>::quiet_NaN();
  std::string trace_out = "trace.csv";
  std::string report_out;
  bool measure_eta = false;
  std::string time_source = "wall";
  std::vector<int> sweep_T;
};

std::pair<std::string, std::string> split_spec(const std::string& s) {
  auto colon = s.find(':');
  if (colon == std::string::npos) return {s, ""};
  return {s.substr(0, colon), s.substr(colon + 1)};
}

// Mildly indefinite spectrum (eigenvalues mapped into [-0.1, 2]): enough
// negative curvature to exercise the nonconvex theory while descent runs
// still settle into a local basin instead of escaping to -infinity.
Matrix seeded_indefinite(Index dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix raw(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) raw(i, j) = dist(gen);
  Matrix sym = 0.5 * (raw + raw.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
  double span = std::max(hi - lo, 1e-12);
  return Matrix((sym - lo * Matrix::Identity(dim, dim)) * (2.1 / span) -
                0.1 * Matrix::Identity(dim, dim));
}

Vector seeded_vector(Index dim, std::uint64_t seed) {
  std::mt19937_64 gen(seed ^ 0xc2b2ae3d27d4eb4fULL);
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v[i] = dist(gen);
  return v;
}

struct RunPieces {
  CompositeProblem problem;
  std::shared_ptr<const Dataset> dataset;
  std::unique_ptr<ModelSource> models;
  InnerSolver inner;
  InnerPolicy policy = InnerPolicy::fixed(10);
  OuterConfig config;
  double default_mu = 0.0;
};

RunPieces assemble(const CliOptions& opt) {
  RunPieces run;

  if (opt.problem == "l1lr" || opt.problem == "shdual") {
    if (opt.data_path.empty())
      throw ConfigError("problem '" + opt.problem + "' requires --data");
    std::optional<Index> override_cols;
    if (opt.features_override > 0) override_cols = opt.features_override;
    run.dataset =
        std::make_shared<Dataset>(load_libsvm_file(opt.data_path, override_cols));
    if (opt.problem == "l1lr") {
      run.problem = make_l1_logreg(run.dataset, opt.cost);
    } else {
      run.problem = make_squared_hinge_dual(run.dataset, opt.cost);
      run.default_mu = 1.0 / (2.0 * opt.cost);
    }
  } else if (opt.problem == "ncqp") {
    Matrix b = seeded_indefinite(opt.dim, opt.seed);
    Vector c = seeded_vector(opt.dim, opt.seed + 1);
    run.problem = make_indefinite_quadratic_l1(b, c, opt.l1_weight);
  } else {
    throw ConfigError("unknown problem '" + opt.problem + "'");
  }

  const Index dim = run.problem.dimension;
  auto [model_kind, model_arg] = split_spec(opt.model);
  if (model_kind == "identity") {
    double zeta =
        model_arg.empty() ? run.problem.smooth->lipschitz_estimate() : std::stod(model_arg);
    run.models = std::make_unique<FixedModelSource>(identity_model(zeta, dim));
  } else if (model_kind == "lbfgs") {
    int memory = model_arg.empty() ? 10 : std::stoi(model_arg);
    run.models = std::make_unique<LbfgsModelSource>(dim, memory);
  } else if (model_kind == "blockdiag") {
    if (opt.problem != "shdual")
      throw ConfigError("blockdiag model is defined for the shdual problem");
    Index nb = model_arg.empty() ? 16 : std::stol(model_arg);
    auto ranges = column_blocks(dim, nb);
    run.models = std::make_unique<FixedModelSource>(
        block_diagonal_model(dual_gram_blocks(*run.dataset, opt.cost, ranges), ranges));
  } else if (model_kind == "dense") {
    if (opt.problem != "ncqp") throw ConfigError("dense model is defined for the ncqp problem");
    run.models = std::make_unique<FixedModelSource>(
        dense_symmetric_model(seeded_indefinite(opt.dim, opt.seed)));
  } else {
    throw ConfigError("unknown model '" + opt.model + "'");
  }

  if (opt.inner == "sparsa") {
    run.inner = [](const Subproblem& sub, const InnerPolicy& p, int k, std::uint64_t s) {
      return sparsa_solve(sub, p, k, s);
    };
  } else if (opt.inner == "rpcd") {
    if (opt.problem != "shdual")
      throw ConfigError("rpcd requires the shdual problem (nonnegativity constraint)");
    run.inner = [](const Subproblem& sub, const InnerPolicy& p, int k, std::uint64_t s) {
      return rpcd_solve(sub, p, k, s);
    };
  } else {
    throw ConfigError("unknown inner solver '" + opt.inner + "'");
  }

  auto [policy_kind, policy_arg] = split_spec(opt.inner_policy);
  if (policy_kind == "fixed") {
    run.policy = InnerPolicy::fixed(policy_arg.empty() ? 10 : std::stoi(policy_arg));
  } else if (policy_kind == "increasing") {
    run.policy = InnerPolicy::increasing();
  } else if (policy_kind == "gap") {
    if (policy_arg.empty()) throw ConfigError("gap policy needs a target eta, e.g. gap:0.5");
    run.policy = InnerPolicy::gap_check(std::stod(policy_arg));
  } else {
    throw ConfigError("unknown inner policy '" + opt.inner_policy + "'");
  }

  OuterConfig& cfg = run.config;
  if (opt.algorithm == "ls")
    cfg.algorithm = OuterAlgorithm::LineSearch;
  else if (opt.algorithm == "mod1")
    cfg.algorithm = OuterAlgorithm::ModifyH1;
  else if (opt.algorithm == "mod2")
    cfg.algorithm = OuterAlgorithm::ModifyH2;
  else if (opt.algorithm == "exact-ls")
    cfg.algorithm = OuterAlgorithm::ExactLineSearch;
  else
    throw ConfigError("unknown algorithm '" + opt.algorithm + "'");

  if (cfg.algorithm == OuterAlgorithm::ExactLineSearch && opt.problem != "shdual")
    throw ConfigError("exact-ls requires the shdual problem (quadratic smooth part)");

  cfg.backtrack_factor = opt.beta;
  cfg.sufficient_decrease = opt.gamma;
  cfg.max_outer = opt.max_outer;
  cfg.stop_tol = opt.stop_tol;
  cfg.seed = opt.seed;
  cfg.measure_eta = opt.measure_eta;
  cfg.record_time = opt.time_source != "none";
  if (std::isfinite(opt.fstar)) {
    cfg.fstar = opt.fstar;
    cfg.rel_stop = opt.rel_tol;
  }
  return run;
}

void write_report(const CliOptions& opt, const RunPieces& run, const OuterTrace& trace) {
  if (opt.report_out.empty()) return;
  double mu = std::isfinite(opt.mu) ? opt.mu : run.default_mu;
  std::ofstream out(opt.report_out, std::ios::binary);
  if (!out) throw DataError("cannot open report output '" + opt.report_out + "'");
  if (std::isfinite(opt.fstar)) {
    RateInputs in;
    in.lipschitz = run.problem.smooth->lipschitz_estimate();
    in.mu = mu;
    in.fstar = opt.fstar;
    in.unit_step = run.config.algorithm == OuterAlgorithm::ModifyH1 ||
                   run.config.algorithm == OuterAlgorithm::ModifyH2;
    out << rate_report_json(certify_rates(trace, in)) << '\n';
  } else {
    nlohmann::json j;
    j["notes"] = {"no fstar supplied; rate certification skipped"};
    j["final_objective"] = trace.final_objective;
    j["iterations"] = trace.records.size();
    j["stop_reason"] = trace.stop_reason;
    out << j.dump(2) << '\n';
  }
}

int run_single(const CliOptions& opt) {
  RunPieces run = assemble(opt);
  if (opt.mode == "reference") {
    run.config.max_outer = opt.max_outer * 10;
    run.config.stop_tol = 1e-14;
    run.config.fstar.reset();
    run.config.rel_stop = 0.0;
  }
  OuterTrace trace = solve(run.problem, *run.models, run.inner, run.policy, run.config,
                           Vector::Zero(run.problem.dimension));
  write_trace_csv_file(trace, opt.trace_out);
  write_report(opt, run, trace);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", trace.final_objective);
  if (opt.mode == "reference")
    std::cout << "fstar " << buf << "\n";
  else
    std::cout << "final " << buf << " iterations " << trace.records.size() << " stop "
              << trace.stop_reason << "\n";
  return 0;
}

int classify(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  return 4;
}

int run_sweep(const CliOptions& opt) {
  if (opt.sweep_T.empty()) throw ConfigError("sweep mode requires --T with at least one value");
  std::vector<SweepArm> arms;
  int worst = 0;
  for (int t : opt.sweep_T) {
    CliOptions arm_opt = opt;
    arm_opt.inner_policy = "fixed:" + std::to_string(t);
    try {
      RunPieces run = assemble(arm_opt);
      OuterTrace trace = solve(run.problem, *run.models, run.inner, run.policy, run.config,
                               Vector::Zero(run.problem.dimension));
      arms.push_back({t, std::move(trace)});
      std::cout << "T " << t << " iterations " << arms.back().trace.records.size() << "\n";
    } catch (const std::exception& e) {
      std::cerr << "error: sweep arm T=" << t << ": " << e.what() << "\n";
      worst = std::max(worst, classify(e));
    }
  }
  write_sweep_csv_file(arms, opt.trace_out);
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CliOptions opt;
  CLI::App app{"Inexact successive quadratic approximation solver"};
  app.add_option("--mode", opt.mode, "run | sweep | reference")
      ->check(CLI::IsMember({"run", "sweep", "reference"}));
  app.add_option("--problem", opt.problem, "l1lr | shdual | ncqp");
  app.add_option("--data", opt.data_path, "LIBSVM-format dataset path");
  app.add_option("--features", opt.features_override, "feature-count override");
  app.add_option("--C", opt.cost, "loss weight C > 0");
  app.add_option("--dim", opt.dim, "ncqp dimension");
  app.add_option("--l1-weight", opt.l1_weight, "ncqp l1 weight");
  app.add_option("--algorithm", opt.algorithm, "ls | mod1 | mod2 | exact-ls");
  app.add_option("--model", opt.model, "identity[:zeta] | lbfgs[:m] | blockdiag[:nb] | dense");
  app.add_option("--inner", opt.inner, "sparsa | rpcd");
  app.add_option("--inner-policy", opt.inner_policy, "fixed:T | increasing | gap:eta");
  app.add_option("--beta", opt.beta, "backtracking factor in (0,1)");
  app.add_option("--gamma", opt.gamma, "sufficient-decrease coefficient");
  app.add_option("--max-outer", opt.max_outer, "outer iteration cap");
  app.add_option("--stop-tol", opt.stop_tol, "stationarity tolerance");
  app.add_option("--seed", opt.seed, "random seed");
  app.add_option("--fstar", opt.fstar, "reference optimum for stopping/report");
  app.add_option("--rel-tol", opt.rel_tol, "relative-error stopping threshold");
  app.add_option("--mu", opt.mu, "strong-convexity modulus for the report");
  app.add_option("--trace-out", opt.trace_out, "trace CSV path");
  app.add_option("--report-out", opt.report_out, "report JSON path");
  app.add_flag("--measure-eta", opt.measure_eta, "measure per-iteration inexactness");
  app.add_option("--time", opt.time_source, "wall | none (deterministic traces)")
      ->check(CLI::IsMember({"wall", "none"}));
  app.add_option("--T", opt.sweep_T, "sweep arms (inner iteration counts)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (opt.mode == "sweep") return run_sweep(opt);
    return run_single(opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify(e);
  }
}
