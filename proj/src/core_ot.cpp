#include "etk/core_ot.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "etk/errors.hpp"
#include "etk/oracle.hpp"

namespace etk {

namespace {

void require_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("gamma must be positive and finite");
}

void require_square(const CostMatrix& cost, const ProbabilityVector& L,
                    const ProbabilityVector& W) {
  if (cost.rows() != L.size() || cost.cols() != W.size())
    throw std::invalid_argument(
        "dimension mismatch: cost is " + std::to_string(cost.rows()) + "x" +
        std::to_string(cost.cols()) + ", marginals have " +
        std::to_string(L.size()) + " and " + std::to_string(W.size()) +
        " entries");
}

// log(sum exp(v)) without overflow.
template <typename Expr>
double log_sum_exp(const Expr& v) {
  const double top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((v.array() - top).exp().sum());
}

}  // namespace

ProbabilityVector::ProbabilityVector(Vector weights)
    : weights_(std::move(weights)) {
  if (weights_.size() == 0)
    throw std::invalid_argument("probability vector must be nonempty");
  for (Index i = 0; i < weights_.size(); ++i) {
    if (!std::isfinite(weights_[i]))
      throw std::invalid_argument("non-finite weight at index " +
                                  std::to_string(i));
    if (weights_[i] < kMinMass)
      throw std::invalid_argument(
          "weight at index " + std::to_string(i) +
          " is zero or negative; pre-clamp with smooth_weights()");
  }
  weights_ /= weights_.sum();
}

ProbabilityVector ProbabilityVector::uniform(Index n) {
  return ProbabilityVector(Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

ProbabilityVector smooth_weights(const Vector& raw, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if ((raw.array() < 0.0).any())
    throw std::invalid_argument("weights must be nonnegative");
  return ProbabilityVector(Vector(raw.array() + eps));
}

std::pair<ProbabilityVector, ProbabilityVector> make_marginals(
    const Vector& raw_rows, const Vector& raw_cols) {
  const double lhs = raw_rows.sum();
  const double rhs = raw_cols.sum();
  if (std::abs(lhs - rhs) > 1e-9)
    throw std::invalid_argument(
        "marginal totals differ (" + std::to_string(lhs) + " vs " +
        std::to_string(rhs) + "); the balance constraints are infeasible");
  return {ProbabilityVector(raw_rows), ProbabilityVector(raw_cols)};
}

CostMatrix::CostMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.size() == 0)
    throw std::invalid_argument("cost matrix must be nonempty");
  for (Index i = 0; i < entries_.rows(); ++i) {
    for (Index j = 0; j < entries_.cols(); ++j) {
      const double c = entries_(i, j);
      if (!std::isfinite(c))
        throw std::invalid_argument("non-finite cost at (" + std::to_string(i) +
                                    ", " + std::to_string(j) + ")");
      if (c < 0.0)
        throw std::invalid_argument("negative cost at (" + std::to_string(i) +
                                    ", " + std::to_string(j) + ")");
    }
  }
}

CostMatrix CostMatrix::squared_distances(const Matrix& rows,
                                         const Matrix& cols) {
  if (rows.cols() != cols.cols())
    throw std::invalid_argument("support points have different dimensions");
  Matrix c(rows.rows(), cols.rows());
  for (Index i = 0; i < rows.rows(); ++i)
    for (Index j = 0; j < cols.rows(); ++j)
      c(i, j) = (rows.row(i) - cols.row(j)).squaredNorm();
  return CostMatrix(std::move(c));
}

DualPotentials DualPotentials::canonical() const {
  const double shift = lambda.size() > 0 ? lambda.mean() : 0.0;
  return {(lambda.array() - shift).matrix(), (mu.array() + shift).matrix()};
}

double DualPotentials::norm() const {
  return std::sqrt(lambda.squaredNorm() + mu.squaredNorm());
}

TransportPlan::TransportPlan(Matrix entries, double gamma)
    : entries_(std::move(entries)), gamma_(gamma) {
  require_gamma(gamma);
  if (!entries_.allFinite() || (entries_.array() < 0.0).any())
    throw std::invalid_argument("plan entries must be finite and nonnegative");
  if (std::abs(entries_.sum() - 1.0) > 1e-10)
    throw std::invalid_argument("plan mass must be 1");
}

MarginalResidual marginal_residual(const Matrix& plan,
                                   const ProbabilityVector& L,
                                   const ProbabilityVector& W) {
  if (plan.rows() != L.size() || plan.cols() != W.size())
    throw std::invalid_argument("plan and marginals have different sizes");
  MarginalResidual r;
  r.row = plan.rowwise().sum() - L.weights();
  r.col = plan.colwise().sum().transpose() - W.weights();
  r.norm = std::sqrt(r.row.squaredNorm() + r.col.squaredNorm());
  return r;
}

TransportPlan plan_from_duals(const DualPotentials& duals,
                              const CostMatrix& cost, double gamma) {
  require_gamma(gamma);
  const Index n = cost.rows();
  const Index m = cost.cols();
  if (duals.lambda.size() != n || duals.mu.size() != m)
    throw std::invalid_argument("potentials do not match cost dimensions");

  Matrix expo(n, m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < n; ++i) {
      const double e =
          (-cost.entries()(i, j) + duals.lambda[i] + duals.mu[j]) / gamma;
      if (!std::isfinite(e))
        throw OverflowError(static_cast<std::size_t>(i),
                            static_cast<std::size_t>(j));
      expo(i, j) = e;
    }
  }
  const double top = expo.maxCoeff();
  Matrix x = (expo.array() - top).exp().matrix();
  x /= x.sum();
  return TransportPlan(std::move(x), gamma);
}

DualPotentials balancing_step(const DualPotentials& duals,
                              const CostMatrix& cost,
                              const ProbabilityVector& L,
                              const ProbabilityVector& W, double gamma,
                              UpdateOrder order) {
  require_gamma(gamma);
  require_square(cost, L, W);
  const Matrix& c = cost.entries();
  const Index n = c.rows();
  const Index m = c.cols();

  // lambda_i = gamma * (ln L_i - LSE_j((-c_ij + mu_j)/gamma) + 1)
  DualPotentials next{Vector(n), Vector(m)};
  Vector scratch(std::max(n, m));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j)
      scratch[j] = (-c(i, j) + duals.mu[j]) / gamma;
    next.lambda[i] =
        gamma * (std::log(L[i]) - log_sum_exp(scratch.head(m)) + 1.0);
  }
  const Vector& lambda_src =
      order == UpdateOrder::gauss_seidel ? next.lambda : duals.lambda;
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < n; ++i)
      scratch[i] = (-c(i, j) + lambda_src[i]) / gamma;
    next.mu[j] = gamma * (std::log(W[j]) - log_sum_exp(scratch.head(n)) + 1.0);
  }
  return next;
}

double entropic_cost(const Matrix& plan, const CostMatrix& cost,
                     double gamma) {
  double entropy = 0.0;
  for (Index j = 0; j < plan.cols(); ++j)
    for (Index i = 0; i < plan.rows(); ++i) {
      const double x = plan(i, j);
      if (x > 0.0) entropy += x * std::log(x);
    }
  return gamma * entropy + (plan.array() * cost.entries().array()).sum();
}

SolveReport solve_entropic_ot(const CostMatrix& cost, const ProbabilityVector& L,
                              const ProbabilityVector& W, double gamma,
                              const StoppingRule& stop,
                              const SolveOptions& options) {
  require_gamma(gamma);
  require_square(cost, L, W);

  DualPotentials duals =
      options.initial ? *options.initial : DualPotentials::zeros(L.size());
  if (duals.lambda.size() != L.size() || duals.mu.size() != W.size())
    throw std::invalid_argument("initial potentials have the wrong size");

  std::size_t iterations = 0;
  bool converged = false;
  double best_residual = std::numeric_limits<double>::infinity();
  std::size_t best_at = 0;
  while (iterations < stop.max_iterations) {
    duals = balancing_step(duals, cost, L, W, gamma, options.order);
    ++iterations;
    // The canonical shift keeps the potentials bounded across sweeps.
    duals = duals.canonical();

    if (stop.kind == StoppingRule::Kind::max_iterations && !options.observer)
      continue;
    const TransportPlan plan = plan_from_duals(duals, cost, gamma);
    const double residual = marginal_residual(plan, L, W).norm;
    if (options.observer) options.observer(iterations, residual, duals);

    if (stop.kind == StoppingRule::Kind::residual &&
        residual <= stop.threshold) {
      converged = true;
      break;
    }
    if (stop.kind == StoppingRule::Kind::certificate &&
        inner_stop_criterion(duals, plan, L, W, stop.threshold).satisfied) {
      converged = true;
      break;
    }
    if (residual < best_residual) {
      best_residual = residual;
      best_at = iterations;
    } else if (options.stall_window > 0 &&
               iterations - best_at >= options.stall_window) {
      break;
    }
  }
  if (stop.kind == StoppingRule::Kind::max_iterations) converged = true;

  TransportPlan plan = plan_from_duals(duals, cost, gamma);
  const double residual = marginal_residual(plan, L, W).norm;
  const double value = entropic_cost(plan.entries(), cost, gamma);
  return SolveReport{std::move(plan), std::move(duals), value, iterations,
                     residual, converged};
}

Vector grad_H(const ProbabilityVector& L, const ProbabilityVector& W,
              const CostMatrix& cost, double gamma, double tol) {
  const SolveReport report =
      solve_entropic_ot(cost, L, W, gamma, StoppingRule::residual(tol));
  if (!report.converged)
    throw ToleranceNotReached("balancing did not reach the gradient tolerance",
                              report.marginal_residual, report.duals.norm(),
                              report.iterations);
  return report.duals.lambda;  // already zero-mean
}

double dual_H_star(const Vector& lambda, const ProbabilityVector& W,
                   const CostMatrix& cost, double gamma) {
  require_gamma(gamma);
  const Matrix& c = cost.entries();
  if (lambda.size() != c.rows() || W.size() != c.cols())
    throw std::invalid_argument("dimension mismatch in dual_H_star");
  double total = 0.0;
  Vector scratch(c.rows());
  for (Index j = 0; j < c.cols(); ++j) {
    scratch = (lambda - c.col(j)) / gamma;
    total += W[j] * (log_sum_exp(scratch) - std::log(W[j]));
  }
  return gamma * total;
}

ProbabilityVector grad_H_star(const Vector& lambda, const ProbabilityVector& W,
                              const CostMatrix& cost, double gamma) {
  require_gamma(gamma);
  const Matrix& c = cost.entries();
  if (lambda.size() != c.rows() || W.size() != c.cols())
    throw std::invalid_argument("dimension mismatch in grad_H_star");
  Vector out = Vector::Zero(c.rows());
  Vector scratch(c.rows());
  for (Index j = 0; j < c.cols(); ++j) {
    scratch = (lambda - c.col(j)) / gamma;
    const double top = scratch.maxCoeff();
    scratch = (scratch.array() - top).exp().matrix();
    out += (W[j] / scratch.sum()) * scratch;
  }
  // Softmax entries can underflow to zero far from the optimum.
  out = out.cwiseMax(kMinMass);
  return ProbabilityVector(std::move(out));
}

double hilbert_metric(const Vector& u, const Vector& v) {
  if (u.size() != v.size() || u.size() == 0)
    throw std::invalid_argument("hilbert_metric needs equal nonempty sizes");
  if ((u.array() <= 0.0).any() || (v.array() <= 0.0).any())
    throw std::invalid_argument("hilbert_metric needs strictly positive entries");
  // ln max(u/v) - ln min(u/v), evaluated in logs to avoid overflow.
  const Eigen::ArrayXd log_ratio = u.array().log() - v.array().log();
  return log_ratio.maxCoeff() - log_ratio.minCoeff();
}

}  // namespace etk
