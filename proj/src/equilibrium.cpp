#include "etk/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "etk/errors.hpp"

namespace etk {

ToyCostModel::ToyCostModel(CostMatrix base, std::vector<Matrix> sensitivities,
                           double beta, Vector y_hat)
    : base_(std::move(base)),
      sens_(std::move(sensitivities)),
      beta_(beta),
      y_hat_(std::move(y_hat)) {
  if (!(beta_ > 0.0)) throw std::invalid_argument("beta must be positive");
  if (static_cast<Index>(sens_.size()) != y_hat_.size())
    throw std::invalid_argument("one sensitivity matrix per coordinate of y");
  for (std::size_t k = 0; k < sens_.size(); ++k) {
    if (sens_[k].rows() != base_.rows() || sens_[k].cols() != base_.cols())
      throw std::invalid_argument("sensitivity " + std::to_string(k) +
                                  " does not match the cost shape");
    if (!sens_[k].allFinite() || (sens_[k].array() < 0.0).any())
      throw std::invalid_argument("sensitivity " + std::to_string(k) +
                                  " has negative or non-finite entries");
  }
}

CostMatrix ToyCostModel::cost(const Vector& y) const {
  if (y.size() != dim()) throw std::invalid_argument("y has the wrong size");
  Matrix c = base_.entries();
  for (Index k = 0; k < dim(); ++k) c += y[k] * sens_[static_cast<std::size_t>(k)];
  return CostMatrix(std::move(c));
}

std::vector<Matrix> ToyCostModel::cost_gradient(const Vector&) const {
  return sens_;
}

double ToyCostModel::g(const Vector& y) const {
  return -0.5 * beta_ * (y - y_hat_).squaredNorm();
}

Vector ToyCostModel::grad_g(const Vector& y) const {
  return -beta_ * (y - y_hat_);
}

std::optional<double> ToyCostModel::joint_lipschitz() const {
  // Hessian of Phi is A^T (diag(p) - p p^T) A + beta on the y block, where A
  // maps (lambda, mu, y) to the exponents; the middle factor is <= 1.
  const Index n = base_.rows();
  const Index m = base_.cols();
  const Index d = dim();
  Matrix A = Matrix::Zero(n * m, n + m + d);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < n; ++i) {
      const Index row = i + j * n;
      A(row, i) = 1.0;
      A(row, n + j) = 1.0;
      for (Index k = 0; k < d; ++k)
        A(row, n + m + k) = -sens_[static_cast<std::size_t>(k)](i, j);
    }
  const double op = Eigen::JacobiSVD<Matrix>(A).singularValues()(0);
  return op * op + beta_;
}

std::shared_ptr<ToyCostModel> toy_cost_model(CostMatrix base,
                                             std::vector<Matrix> sensitivities,
                                             double beta, Vector y_hat) {
  return std::make_shared<ToyCostModel>(std::move(base),
                                        std::move(sensitivities), beta,
                                        std::move(y_hat));
}

double inner_dual_value(const DualPotentials& duals, const Vector& y,
                        const EquilibriumInputs& in) {
  const CostMatrix c = in.model->cost(y);
  const double gamma = in.gamma;
  Matrix expo(c.rows(), c.cols());
  for (Index j = 0; j < c.cols(); ++j)
    for (Index i = 0; i < c.rows(); ++i)
      expo(i, j) = (-c.entries()(i, j) + duals.lambda[i] + duals.mu[j]) / gamma;
  const double top = expo.maxCoeff();
  const double lse = top + std::log((expo.array() - top).exp().sum());
  return gamma * lse - duals.lambda.dot(in.L.weights()) -
         duals.mu.dot(in.W.weights()) - in.model->g(y);
}

Vector danskin_gradient(const TransportPlan& plan, const Vector& y,
                        const CostModel& model) {
  const std::vector<Matrix> dc = model.cost_gradient(y);
  Vector grad = -model.grad_g(y);
  for (std::size_t k = 0; k < dc.size(); ++k)
    grad[static_cast<Index>(k)] -= (plan.entries().array() * dc[k].array()).sum();
  return grad;
}

namespace {

OracleSettings settings_for(const CostModel& model) {
  if (model.smooth())
    return {OraclePath::min_smooth, model.joint_lipschitz()};
  return {OraclePath::min_subgradient, model.subgradient_bound()};
}

InnerSolver equilibrium_inner(const EquilibriumInputs& in) {
  return [in](const Vector& y, double delta) {
    const CostMatrix c = in.model->cost(y);
    const SolveReport rep =
        solve_entropic_ot(c, in.L, in.W, in.gamma,
                          StoppingRule::certificate(delta, in.max_inner_iterations));
    InnerSolution sol;
    sol.value = inner_dual_value(rep.duals, y, in);
    sol.grad_y = danskin_gradient(rep.plan, y, *in.model);
    sol.certified = rep.converged;
    sol.residual = rep.marginal_residual;
    sol.dual_norm = rep.duals.norm();
    sol.iterations = rep.iterations;
    sol.primal = rep.plan.entries().reshaped();
    return sol;
  };
}

}  // namespace

OracleFn make_equilibrium_oracle(const EquilibriumInputs& in) {
  if (!in.model) throw std::invalid_argument("no cost model");
  if (in.model->support_size() != in.L.size() ||
      in.model->support_size() != in.W.size())
    throw std::invalid_argument("cost model and marginals differ in size");
  return make_inexact_oracle(equilibrium_inner(in), settings_for(*in.model));
}

InexactOracleReply f_oracle(const Vector& y, const EquilibriumInputs& in,
                            double delta) {
  return make_equilibrium_oracle(in)(y, delta);
}

EquilibriumReport solve_equilibrium(const EquilibriumInputs& in,
                                    const FeasibleSet& Q, double eps, int p,
                                    const EquilibriumOptions& options) {
  if (!in.model) throw std::invalid_argument("no cost model");
  if (Q.lower.size() != in.model->dim())
    throw std::invalid_argument("feasible set and model differ in dimension");
  const Vector y0 = options.y0 ? *options.y0 : Vector(Q.lower.cwiseMax(0.0));

  UniversalOptions uo;
  uo.eps = eps;
  uo.p = p;
  uo.max_iter = options.max_iter;
  uo.delta_coefficient = options.delta_coefficient;
  uo.observer = options.observer;
  UniversalResult run = universal_method(make_equilibrium_oracle(in),
                                         ProxSetup::box(Q.lower), y0, uo);

  // Final certified inner solve at the returned point.
  const double delta = scheduled_delta(eps, p, run.history.iterations,
                                       options.delta_coefficient);
  const CostMatrix c = in.model->cost(run.point);
  SolveReport rep = solve_entropic_ot(
      c, in.L, in.W, in.gamma,
      StoppingRule::certificate(delta, in.max_inner_iterations));
  if (!rep.converged)
    throw ToleranceNotReached("final inner solve missed its certificate",
                              rep.marginal_residual, rep.duals.norm(),
                              rep.iterations);

  const Index n = in.L.size();
  Matrix averaged = run.history.averaged_primal.size() == n * n
                        ? Matrix(run.history.averaged_primal.reshaped(n, n))
                        : rep.plan.entries();
  const double f = inner_dual_value(rep.duals, run.point, in);
  EquilibriumReport out{run.point,
                        f,
                        std::move(rep.plan),
                        std::move(rep.duals),
                        run.history.iterations,
                        run.history.inner_iterations + rep.iterations,
                        run.history.converged,
                        std::move(averaged),
                        std::move(run.history)};
  return out;
}

}  // namespace etk
