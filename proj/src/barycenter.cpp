#include "etk/barycenter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "etk/errors.hpp"
#include "etk/oracle.hpp"
#include "etk/parallel.hpp"

namespace etk {

BarycenterProblem::BarycenterProblem(std::vector<ProbabilityVector> ms,
                                     CostMatrix c, double g)
    : measures(std::move(ms)), cost(std::move(c)), gamma(g) {
  if (measures.empty())
    throw std::invalid_argument("barycenter needs at least one measure");
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (cost.rows() != cost.cols())
    throw std::invalid_argument("barycenter cost must be square");
  for (std::size_t k = 0; k < measures.size(); ++k)
    if (measures[k].size() != cost.rows())
      throw std::invalid_argument("measure " + std::to_string(k) +
                                  " does not match the support size");
}

std::vector<std::string> BarycenterProblem::warnings() const {
  std::vector<std::string> out;
  if (gamma < 0.01)
    out.push_back("gamma " + std::to_string(gamma) +
                  " is below 0.01; expect slow convergence");
  return out;
}

std::vector<Vector> DualState::full() const {
  std::vector<Vector> out = potentials;
  if (potentials.empty()) return out;
  Vector last = Vector::Zero(potentials.front().size());
  for (const Vector& p : potentials) last -= p;
  out.push_back(std::move(last));
  return out;
}

Vector DualState::flatten() const {
  if (potentials.empty()) return {};
  const Index n = potentials.front().size();
  Vector flat(n * static_cast<Index>(potentials.size()));
  for (std::size_t k = 0; k < potentials.size(); ++k)
    flat.segment(static_cast<Index>(k) * n, n) = potentials[k];
  return flat;
}

DualState DualState::unflatten(const Vector& flat, std::size_t blocks,
                               Index n) {
  if (flat.size() != n * static_cast<Index>(blocks))
    throw std::invalid_argument("flat dual vector has the wrong size");
  DualState s;
  s.potentials.reserve(blocks);
  for (std::size_t k = 0; k < blocks; ++k)
    s.potentials.push_back(flat.segment(static_cast<Index>(k) * n, n));
  return s;
}

namespace {

struct TermResult {
  double value = 0.0;
  Vector lambda;
  std::size_t iterations = 0;
  double residual = 0.0;
  double dual_norm = 0.0;
  bool converged = false;
};

TermResult solve_term(const ProbabilityVector& L, const ProbabilityVector& W,
                      const BarycenterProblem& problem,
                      const StoppingRule& stop) {
  const SolveReport rep =
      solve_entropic_ot(problem.cost, L, W, problem.gamma, stop);
  TermResult t;
  t.lambda = rep.duals.lambda;
  // <lambda, L> - H*_W(lambda): the dual value with mu maximized out. Never
  // exceeds H_W(L).
  t.value = t.lambda.dot(L.weights()) -
            dual_H_star(t.lambda, W, problem.cost, problem.gamma);
  t.iterations = rep.iterations;
  t.residual = rep.marginal_residual;
  t.dual_norm = rep.duals.norm();
  t.converged = rep.converged;
  return t;
}

std::vector<TermResult> solve_terms(const ProbabilityVector& L,
                                    const BarycenterProblem& problem,
                                    const StoppingRule& stop, int threads) {
  std::vector<TermResult> terms(problem.count());
  parallel_for(problem.count(), threads, [&](std::size_t k) {
    terms[k] = solve_term(L, problem.measures[k], problem, stop);
  });
  return terms;
}

BarycenterResult single_measure(const BarycenterProblem& problem) {
  BarycenterResult r{problem.measures.front(), {}, std::nullopt, {}, 0.0,
                     std::nullopt};
  r.history.final_point = problem.measures.front().weights();
  r.history.converged = true;
  return r;
}

}  // namespace

ObjectiveValue barycenter_objective(const ProbabilityVector& L,
                                    const BarycenterProblem& problem,
                                    double tol, int threads) {
  if (L.size() != problem.support_size())
    throw std::invalid_argument("candidate barycenter has the wrong size");
  const std::vector<TermResult> terms =
      solve_terms(L, problem, StoppingRule::residual(tol), threads);
  ObjectiveValue out;
  out.gradient = Vector::Zero(L.size());
  for (const TermResult& t : terms) {
    if (!t.converged)
      throw ToleranceNotReached("barycenter inner solve missed its tolerance",
                                t.residual, t.dual_norm, t.iterations);
    out.value += t.value;
    out.gradient += t.lambda;
    out.inner_iterations += t.iterations;
    out.max_residual = std::max(out.max_residual, t.residual);
  }
  return out;
}

double evaluate_barycenter(const ProbabilityVector& L,
                           const BarycenterProblem& problem, double tol) {
  return barycenter_objective(L, problem, tol).value;
}

BarycenterResult barycenter_primal(const BarycenterProblem& problem,
                                   const BarycenterOptions& options) {
  if (problem.count() == 1 && options.single_measure_identity)
    return single_measure(problem);

  const double m = static_cast<double>(problem.count());
  InnerSolver inner = [&problem, m, threads = options.threads](
                          const Vector& y, double delta) {
    const ProbabilityVector L(y);
    const std::vector<TermResult> terms =
        solve_terms(L, problem, StoppingRule::certificate(delta / m), threads);
    InnerSolution sol;
    sol.grad_y = Vector::Zero(y.size());
    sol.certified = true;
    double residual_sq = 0.0;
    double norm_sq = 0.0;
    sol.primal.resize(y.size() * static_cast<Index>(terms.size()));
    for (std::size_t k = 0; k < terms.size(); ++k)
      sol.primal.segment(static_cast<Index>(k) * y.size(), y.size()) =
          terms[k].lambda;
    for (const TermResult& t : terms) {
      sol.value += t.value;
      sol.grad_y += t.lambda;
      sol.iterations += t.iterations;
      sol.certified = sol.certified && t.converged;
      residual_sq += t.residual * t.residual;
      norm_sq += t.dual_norm * t.dual_norm;
    }
    sol.residual = std::sqrt(residual_sq);
    sol.dual_norm = std::sqrt(norm_sq);
    return sol;
  };
  const OracleFn oracle =
      make_inexact_oracle(std::move(inner), {OraclePath::max_subgradient, {}});

  UniversalOptions uo;
  uo.eps = options.eps;
  uo.p = options.p;
  uo.max_iter = options.max_iter;
  uo.observer = options.observer;
  const Index n = problem.support_size();
  // Averaged potentials, shifted so they sum to a constant, are dual feasible:
  // f(L) >= sum_k <lambda^k, L> - H*_k(lambda^k) = mean(S) - sum_k H*_k.
  uo.lower_bound = [&problem, n](const Vector& avg) {
    const std::size_t m = problem.count();
    Vector S = Vector::Zero(n);
    for (std::size_t k = 0; k < m; ++k)
      S += avg.segment(static_cast<Index>(k) * n, n);
    const Vector correction =
        (S.array() - S.mean()).matrix() / static_cast<double>(m);
    double bound = S.mean();
    for (std::size_t k = 0; k < m; ++k) {
      const Vector lambda =
          avg.segment(static_cast<Index>(k) * n, n) - correction;
      bound -= dual_H_star(lambda, problem.measures[k], problem.cost,
                           problem.gamma);
    }
    return bound;
  };
  UniversalResult run = universal_method(
      oracle, ProxSetup::simplex(n), ProbabilityVector::uniform(n).weights(), uo);

  BarycenterResult out{ProbabilityVector(run.point), std::move(run.history),
                       std::nullopt, {}, 0.0, std::nullopt};
  return out;
}

double dual_objective(const DualState& state,
                      const BarycenterProblem& problem) {
  const std::size_t m = problem.count();
  if (state.potentials.size() + 1 != m)
    throw std::invalid_argument("dual state needs m - 1 potentials");
  const std::vector<Vector> lambdas = state.full();
  double total = 0.0;
  for (std::size_t k = 0; k < m; ++k)
    total += dual_H_star(lambdas[k], problem.measures[k], problem.cost,
                         problem.gamma);
  return total;
}

namespace {

std::vector<Vector> conjugate_gradients(const DualState& state,
                                        const BarycenterProblem& problem,
                                        int threads) {
  const std::vector<Vector> lambdas = state.full();
  std::vector<Vector> grads(lambdas.size());
  parallel_for(lambdas.size(), threads, [&](std::size_t k) {
    grads[k] = grad_H_star(lambdas[k], problem.measures[k], problem.cost,
                           problem.gamma)
                   .weights();
  });
  return grads;
}

}  // namespace

Vector dual_gradient(const DualState& state, const BarycenterProblem& problem,
                     int threads) {
  const std::size_t m = problem.count();
  if (state.potentials.size() + 1 != m)
    throw std::invalid_argument("dual state needs m - 1 potentials");
  const std::vector<Vector> grads = conjugate_gradients(state, problem, threads);
  DualState g;
  for (std::size_t k = 0; k + 1 < m; ++k)
    g.potentials.push_back(grads[k] - grads[m - 1]);
  return g.flatten();
}

BarycenterResult barycenter_dual(const BarycenterProblem& problem,
                                 const BarycenterOptions& options) {
  const std::size_t m = problem.count();
  if (m == 1) {
    if (options.single_measure_identity) return single_measure(problem);
    const ProbabilityVector L = grad_H_star(
        Vector::Zero(problem.support_size()), problem.measures.front(),
        problem.cost, problem.gamma);
    BarycenterResult r{L, {}, DualState{}, {0.0}, 0.0,
                       -dual_H_star(Vector::Zero(problem.support_size()),
                                    problem.measures.front(), problem.cost,
                                    problem.gamma)};
    r.history.final_point = L.weights();
    r.history.converged = true;
    return r;
  }

  const Index n = problem.support_size();
  const std::size_t blocks = m - 1;
  Vector y0 = Vector::Zero(n * static_cast<Index>(blocks));
  if (options.warm_start) {
    if (options.warm_start->potentials.size() != blocks)
      throw std::invalid_argument("warm start has the wrong number of blocks");
    y0 = options.warm_start->flatten();
  }

  const OracleFn oracle = [&problem, blocks, n, threads = options.threads](
                              const Vector& y, double) {
    const DualState s = DualState::unflatten(y, blocks, n);
    InexactOracleReply r;
    r.F = dual_objective(s, problem);
    r.G = dual_gradient(s, problem, threads);
    r.delta = 0.0;
    return r;
  };

  UniversalOptions uo;
  uo.eps = options.eps;
  uo.p = options.p;
  uo.max_iter = options.max_iter;
  uo.observer = options.observer;
  UniversalResult run =
      universal_method(oracle, ProxSetup::free(y0.size()), y0, uo);

  DualState state = DualState::unflatten(run.point, blocks, n);
  const std::vector<Vector> grads =
      conjugate_gradients(state, problem, options.threads);
  Vector avg = Vector::Zero(n);
  for (const Vector& g : grads) avg += g;
  avg /= static_cast<double>(grads.size());

  BarycenterResult out{ProbabilityVector(avg), std::move(run.history),
                       std::nullopt, {}, 0.0, std::nullopt};
  for (const Vector& g : grads) {
    const double spread = (g - avg).lpNorm<Eigen::Infinity>();
    out.recovery_spread.push_back(spread);
    out.max_recovery_spread = std::max(out.max_recovery_spread, spread);
  }
  out.dual_bound = -dual_objective(state, problem);
  out.dual = std::move(state);
  return out;
}

DualState warm_start_shift(const DualState& prev, std::size_t r) {
  const std::size_t m = prev.potentials.size() + 1;
  if (r >= m)
    throw std::invalid_argument("window shift must be smaller than the window");
  const std::vector<Vector> full = prev.full();
  std::vector<Vector> shifted(full.begin() + static_cast<std::ptrdiff_t>(r),
                              full.end());
  for (std::size_t i = 0; i < r; ++i) shifted.push_back(full.back());
  shifted.resize(m - 1);
  return DualState{std::move(shifted)};
}

}  // namespace etk
