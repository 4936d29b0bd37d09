#include "etk/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "etk/barycenter.hpp"
#include "etk/core_ot.hpp"
#include "etk/equilibrium.hpp"
#include "etk/errors.hpp"
#include "etk/io.hpp"
#include "etk/model_registry.hpp"
#include "json.hpp"

namespace etk {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct TraceRow {
  std::size_t iteration;
  double objective;
  double residual;
  double curvature;
  double wall_time;
};

void write_trace(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw io::InputError("cannot write trace " + path);
  out << "iteration,objective,residual,curvature,wall_time\n";
  char buf[160];
  for (const TraceRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.9f\n", r.iteration,
                  r.objective, r.residual, r.curvature, r.wall_time);
    out << buf;
  }
}

std::vector<TraceRow> trace_of(const RunHistory& h) {
  std::vector<TraceRow> rows;
  rows.reserve(h.records.size());
  for (const IterationRecord& r : h.records)
    rows.push_back({r.iteration, r.objective, r.inner_residual, r.curvature,
                    r.wall_time});
  return rows;
}

json to_json(const Vector& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i))));
  return rows;
}

Vector vector_from(const json& j, const char* what) {
  if (!j.is_array()) throw io::InputError(std::string(what) + " must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Index>(i)] = j[i].get<double>();
  return v;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("ETK_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

// Everything the subcommands share.
struct Common {
  double gamma = 1.0;
  double eps = 1e-6;
  double tol = 1e-8;
  int p = 1;
  std::uint64_t seed = 1;
  std::size_t max_iter = 100000;
  int threads = 0;
  std::string trace;
  std::string out;
  bool timing = false;
};

void emit(const json& result, const Common& c, std::ostream& out) {
  const std::string text = result.dump(2) + "\n";
  if (c.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(c.out);
  if (!f) throw io::InputError("cannot write " + c.out);
  f << text;
}

// ot -------------------------------------------------------------------------

struct OtArgs {
  std::string cost;
  std::string mu;
  std::string nu;
  std::string plan_out;
  bool jacobi = false;
};

int run_ot(const OtArgs& a, const Common& c, std::ostream& out) {
  const io::MeasureFile mu = io::read_measure(a.mu);
  const io::MeasureFile nu = io::read_measure(a.nu);
  const CostMatrix cost =
      a.cost.empty() ? io::cost_from_points(mu, nu) : io::read_cost(a.cost);
  if (mu.weights.size() != cost.rows() || nu.weights.size() != cost.cols())
    throw io::InputError("marginal sizes do not match the cost matrix");
  if (cost.rows() != cost.cols())
    throw io::InputError("the cost matrix must be square");
  auto [L, W] = [&] {
    try {
      return make_marginals(mu.weights, nu.weights);
    } catch (const std::invalid_argument& e) {
      throw io::InputError(e.what());
    }
  }();

  std::vector<TraceRow> rows;
  const auto t0 = Clock::now();
  SolveOptions opts;
  opts.order = a.jacobi ? UpdateOrder::jacobi : UpdateOrder::gauss_seidel;
  if (!c.trace.empty()) {
    opts.observer = [&](std::size_t k, double r, const DualPotentials& d) {
      const TransportPlan plan = plan_from_duals(d, cost, c.gamma);
      rows.push_back({k, entropic_cost(plan.entries(), cost, c.gamma), r, 0.0,
                      seconds_since(t0)});
    };
  }
  const SolveReport rep = solve_entropic_ot(
      cost, L, W, c.gamma, StoppingRule::residual(c.tol, c.max_iter), opts);
  const double wall = seconds_since(t0);

  if (!c.trace.empty()) write_trace(c.trace, rows);
  if (!a.plan_out.empty()) io::write_csv_matrix(a.plan_out, rep.plan.entries());

  json result = {{"command", "ot"},
                 {"n", cost.rows()},
                 {"gamma", c.gamma},
                 {"value", rep.value},
                 {"iterations", rep.iterations},
                 {"residual", rep.marginal_residual},
                 {"converged", rep.converged},
                 {"lambda", to_json(rep.duals.lambda)},
                 {"mu", to_json(rep.duals.mu)}};
  if (c.timing) result["wall_time"] = wall;
  emit(result, c, out);
  return rep.converged ? kExitOk : kExitTolerance;
}

// barycenter -----------------------------------------------------------------

struct BarycenterArgs {
  std::string measures;
  std::string cost;
  std::string mode = "dual";
  std::string warm_start;
  std::size_t window_shift = 0;
  bool identity = true;
};

BarycenterProblem load_barycenter(const BarycenterArgs& a, double gamma) {
  const std::vector<io::MeasureFile> files = io::read_measure_dir(a.measures);
  std::vector<ProbabilityVector> ms;
  for (const auto& f : files) ms.push_back(io::to_probability(f));
  std::optional<CostMatrix> cost;
  if (!a.cost.empty()) {
    cost = io::read_cost(a.cost);
  } else {
    for (const auto& f : files)
      if (!f.points || !files.front().points ||
          f.points->rows() != files.front().points->rows() ||
          f.points->cols() != files.front().points->cols() ||
          *f.points != *files.front().points)
        throw io::InputError(
            "without --cost every measure must carry the same support points");
    cost = io::cost_from_points(files.front(), files.front());
  }
  try {
    return BarycenterProblem(std::move(ms), std::move(*cost), gamma);
  } catch (const std::invalid_argument& e) {
    throw io::InputError(e.what());
  }
}

DualState read_dual_state(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io::InputError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw io::ParseError(path, 0, e.what());
  }
  if (!j.contains("dual") || !j["dual"].contains("potentials"))
    throw io::InputError(path + " holds no dual potentials");
  DualState s;
  for (const auto& p : j["dual"]["potentials"])
    s.potentials.push_back(vector_from(p, "potential"));
  return s;
}

int run_barycenter(const BarycenterArgs& a, const Common& c, std::ostream& out,
                   std::ostream& err) {
  const BarycenterProblem problem = load_barycenter(a, c.gamma);
  for (const std::string& w : problem.warnings()) err << "warning: " << w << "\n";

  BarycenterOptions opts;
  opts.eps = c.eps;
  opts.p = c.p;
  opts.max_iter = c.max_iter;
  opts.threads = resolve_threads(c.threads);
  opts.single_measure_identity = a.identity;
  if (!a.warm_start.empty()) {
    if (a.mode != "dual") throw io::InputError("--warm-start needs --mode dual");
    try {
      opts.warm_start = warm_start_shift(read_dual_state(a.warm_start),
                                         a.window_shift);
    } catch (const std::invalid_argument& e) {
      throw io::InputError(e.what());
    }
  } else if (a.window_shift > 0) {
    throw io::InputError("--window-shift needs --warm-start");
  }

  const auto t0 = Clock::now();
  const BarycenterResult r = a.mode == "primal"
                                 ? barycenter_primal(problem, opts)
                                 : barycenter_dual(problem, opts);
  const double wall = seconds_since(t0);
  if (!c.trace.empty()) write_trace(c.trace, trace_of(r.history));

  json result = {{"command", "barycenter"},
                 {"mode", a.mode},
                 {"n", problem.support_size()},
                 {"m", problem.count()},
                 {"gamma", problem.gamma},
                 {"barycenter", to_json(r.barycenter.weights())},
                 {"objective", r.history.best_objective},
                 {"gap", r.history.final_gap},
                 {"iterations", r.history.iterations},
                 {"oracle_calls", r.history.oracle_calls},
                 {"inner_iterations", r.history.inner_iterations},
                 {"converged", r.history.converged}};
  if (r.dual) {
    json pots = json::array();
    for (const Vector& p : r.dual->potentials) pots.push_back(to_json(p));
    result["dual"] = {{"potentials", pots}};
    result["recovery_spread"] = r.recovery_spread;
    result["max_recovery_spread"] = r.max_recovery_spread;
  }
  if (r.dual_bound) result["dual_bound"] = *r.dual_bound;
  result["warnings"] = problem.warnings();
  if (c.timing) result["wall_time"] = wall;
  emit(result, c, out);
  return r.history.converged ? kExitOk : kExitTolerance;
}

// equilibrium ----------------------------------------------------------------

struct EquilibriumArgs {
  std::string model = "toy";
  std::string config;
};

int run_equilibrium(const EquilibriumArgs& a, const Common& c,
                    std::ostream& out) {
  std::ifstream in(a.config);
  if (!in) throw io::InputError("cannot open " + a.config);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw io::ParseError(a.config, 0, e.what());
  }
  const json& model_cfg = cfg.contains("model") ? cfg["model"] : cfg;
  EquilibriumInputs inputs{ModelRegistry::instance().make(a.model, model_cfg),
                           ProbabilityVector::uniform(1),
                           ProbabilityVector::uniform(1)};
  const Index n = inputs.model->support_size();
  const Vector rows = cfg.contains("L") ? vector_from(cfg["L"], "L")
                                        : Vector(Vector::Ones(n));
  const Vector cols = cfg.contains("W") ? vector_from(cfg["W"], "W")
                                        : Vector(Vector::Ones(n));
  try {
    auto [L, W] = make_marginals(rows, cols);
    inputs.L = std::move(L);
    inputs.W = std::move(W);
  } catch (const std::invalid_argument& e) {
    throw io::InputError(e.what());
  }
  FeasibleSet Q{cfg.contains("lower") ? vector_from(cfg["lower"], "lower")
                                      : Vector(Vector::Zero(inputs.model->dim()))};
  EquilibriumOptions opts;
  opts.max_iter = c.max_iter;
  if (cfg.contains("y0")) opts.y0 = vector_from(cfg["y0"], "y0");

  const auto t0 = Clock::now();
  EquilibriumReport rep = [&] {
    try {
      return solve_equilibrium(inputs, Q, c.eps, c.p, opts);
    } catch (const std::invalid_argument& e) {
      throw io::InputError(e.what());
    }
  }();
  const double wall = seconds_since(t0);
  if (!c.trace.empty()) write_trace(c.trace, trace_of(rep.history));

  json result = {{"command", "equilibrium"},
                 {"model", a.model},
                 {"y", to_json(rep.y)},
                 {"f", rep.f},
                 {"gap", rep.history.final_gap},
                 {"outer_iterations", rep.outer_iterations},
                 {"inner_iterations", rep.inner_iterations},
                 {"converged", rep.converged},
                 {"plan", to_json(rep.plan.entries())},
                 {"lambda", to_json(rep.duals.lambda)},
                 {"mu", to_json(rep.duals.mu)}};
  if (c.timing) result["wall_time"] = wall;
  emit(result, c, out);
  return rep.converged ? kExitOk : kExitTolerance;
}

// bench ----------------------------------------------------------------------

struct BenchArgs {
  std::string what = "sinkhorn";
  Index n = 100;
  std::size_t m = 3;
  double relative = 0.01;
};

json bench_sinkhorn(const BenchArgs& a, const Common& c) {
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix cm(a.n, a.n);
  for (Index i = 0; i < a.n; ++i)
    for (Index j = 0; j < a.n; ++j) cm(i, j) = unit(rng);
  const CostMatrix cost(std::move(cm));
  const ProbabilityVector L = ProbabilityVector::uniform(a.n);
  const ProbabilityVector W = ProbabilityVector::uniform(a.n);
  // |Ax - b| / |b| with b = (L, W).
  const double b_norm =
      std::sqrt(L.weights().squaredNorm() + W.weights().squaredNorm());

  const auto t0 = Clock::now();
  const SolveReport rep =
      solve_entropic_ot(cost, L, W, c.gamma,
                        StoppingRule::residual(a.relative * b_norm, c.max_iter));
  const double wall = seconds_since(t0);
  return {{"command", "bench"},
          {"bench", "sinkhorn"},
          {"n", a.n},
          {"seed", c.seed},
          {"gamma", c.gamma},
          {"iterations", rep.iterations},
          {"relative_residual", rep.marginal_residual / b_norm},
          {"converged", rep.converged},
          {"wall_time", wall}};
}

json bench_barycenter(const BenchArgs& a, const Common& c) {
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix pts(a.n, 2);
  for (Index i = 0; i < a.n; ++i) pts.row(i) << unit(rng), unit(rng);
  std::vector<ProbabilityVector> ms;
  for (std::size_t k = 0; k < a.m; ++k) {
    Vector w(a.n);
    for (Index i = 0; i < a.n; ++i) w[i] = 0.1 + unit(rng);
    ms.emplace_back(std::move(w));
  }
  const BarycenterProblem problem(std::move(ms),
                                  CostMatrix::squared_distances(pts), c.gamma);
  BarycenterOptions opts;
  opts.eps = c.eps;
  opts.max_iter = c.max_iter;
  opts.threads = resolve_threads(c.threads);

  json runs = json::object();
  for (const char* mode : {"primal", "dual"}) {
    const auto t0 = Clock::now();
    const BarycenterResult r = std::string(mode) == "primal"
                                   ? barycenter_primal(problem, opts)
                                   : barycenter_dual(problem, opts);
    runs[mode] = {{"iterations", r.history.iterations},
                  {"oracle_calls", r.history.oracle_calls},
                  {"inner_iterations", r.history.inner_iterations},
                  {"objective", evaluate_barycenter(r.barycenter, problem)},
                  {"converged", r.history.converged},
                  {"wall_time", seconds_since(t0)}};
  }
  return {{"command", "bench"}, {"bench", "barycenter"}, {"n", a.n},
          {"m", a.m},           {"seed", c.seed},        {"gamma", c.gamma},
          {"eps", c.eps},       {"runs", runs}};
}

int run_bench(const BenchArgs& a, const Common& c, std::ostream& out) {
  const json result =
      a.what == "sinkhorn" ? bench_sinkhorn(a, c) : bench_barycenter(a, c);
  emit(result, c, out);
  if (a.what == "sinkhorn") return result["converged"] ? kExitOk : kExitTolerance;
  const bool ok = result["runs"]["primal"]["converged"].get<bool>() &&
                  result["runs"]["dual"]["converged"].get<bool>();
  return ok ? kExitOk : kExitTolerance;
}

void add_common(CLI::App* sub, Common& c, bool solver_flags) {
  sub->add_option("--gamma", c.gamma, "entropic smoothing")
      ->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", c.max_iter, "iteration cap");
  sub->add_option("--out", c.out, "write the result JSON here");
  sub->add_flag("--timing", c.timing, "include wall time in the result");
  sub->add_option("--threads", c.threads,
                  "worker threads (falls back to ETK_THREADS)");
  sub->add_option("--seed", c.seed, "seed for generated instances");
  if (solver_flags) {
    sub->add_option("--eps", c.eps, "outer accuracy")->check(CLI::PositiveNumber);
    sub->add_option("--p", c.p, "0: primal universal, 1: fast universal")
        ->check(CLI::IsMember({0, 1}));
    sub->add_option("--trace", c.trace, "per-iteration CSV trace");
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Entropic optimal transport toolkit"};
  app.name("etk");
  app.require_subcommand(1);

  Common common;

  OtArgs ot;
  CLI::App* ot_cmd = app.add_subcommand("ot", "entropic transport between two measures");
  add_common(ot_cmd, common, false);
  ot_cmd->add_option("--cost", ot.cost, "cost CSV (default: from support points)");
  ot_cmd->add_option("--mu", ot.mu, "row measure JSON")->required();
  ot_cmd->add_option("--nu", ot.nu, "column measure JSON")->required();
  ot_cmd->add_option("--tol", common.tol, "marginal residual tolerance")
      ->check(CLI::PositiveNumber);
  ot_cmd->add_option("--trace", common.trace, "per-sweep CSV trace");
  ot_cmd->add_option("--plan-out", ot.plan_out, "write the plan as CSV");
  ot_cmd->add_flag("--jacobi", ot.jacobi, "update both potentials from the old ones");

  BarycenterArgs bary;
  CLI::App* bary_cmd = app.add_subcommand("barycenter", "entropic Wasserstein barycenter");
  add_common(bary_cmd, common, true);
  bary_cmd->add_option("--measures", bary.measures, "directory of measure JSON files")
      ->required();
  bary_cmd->add_option("--cost", bary.cost, "cost CSV (default: from support points)");
  bary_cmd->add_option("--mode", bary.mode, "primal or dual")
      ->check(CLI::IsMember({"primal", "dual"}));
  bary_cmd->add_option("--warm-start", bary.warm_start,
                       "previous dual result JSON to start from");
  bary_cmd->add_option("--window-shift", bary.window_shift,
                       "measures dropped from the front since the previous run");
  bary_cmd->add_flag("!--smoothed-single", bary.identity,
                     "for one measure, minimize the smoothed objective instead of returning it");

  EquilibriumArgs eq;
  CLI::App* eq_cmd = app.add_subcommand("equilibrium", "multi-stage transport equilibrium");
  add_common(eq_cmd, common, true);
  eq_cmd->add_option("--model", eq.model, "registered cost model");
  eq_cmd->add_option("--config", eq.config, "model and marginals JSON")->required();

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "timing harness");
  add_common(bench_cmd, common, true);
  bench_cmd->add_option("what", bench.what, "sinkhorn or barycenter")
      ->check(CLI::IsMember({"sinkhorn", "barycenter"}));
  bench_cmd->add_option("--n", bench.n, "support size")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--m", bench.m, "number of measures")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--rel-tol", bench.relative,
                        "relative marginal residual target")
      ->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*ot_cmd) return run_ot(ot, common, out);
    if (*bary_cmd) return run_barycenter(bary, common, out, err);
    if (*eq_cmd) return run_equilibrium(eq, common, out);
    if (*bench_cmd) return run_bench(bench, common, out);
  } catch (const io::InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ToleranceNotReached& e) {
    err << "tolerance not reached: " << e.what() << "\n";
    return kExitTolerance;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << "\n";
    return kExitTolerance;
  } catch (const OverflowError& e) {
    err << "overflow: " << e.what() << "\n";
    return kExitTolerance;
  }
  return kExitInput;
}

}  // namespace etk
