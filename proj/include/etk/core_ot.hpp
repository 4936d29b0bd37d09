#ifndef ETK_CORE_OT_HPP
#define ETK_CORE_OT_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <optional>
#include <utility>

namespace etk {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Entries below this are treated as zero mass and rejected.
inline constexpr double kMinMass = 1e-300;

/// Point on the probability simplex with strictly positive entries.
///
/// Construction normalizes the weights to sum to one. Inputs with an entry
/// below kMinMass, a non-finite entry, or an empty vector are rejected; use
/// smooth_weights() to pre-clamp data that contains zeros.
class ProbabilityVector {
 public:
  explicit ProbabilityVector(Vector weights);

  static ProbabilityVector uniform(Index n);

  const Vector& weights() const { return weights_; }
  Index size() const { return weights_.size(); }
  double operator[](Index i) const { return weights_[i]; }

 private:
  Vector weights_;
};

/// (w + eps) / sum(w + eps). Nonnegative inputs only.
ProbabilityVector smooth_weights(const Vector& raw, double eps);

/// Normalizes a pair of marginals after checking the raw totals agree to
/// 1e-9; a mismatch means the balance constraints are infeasible.
std::pair<ProbabilityVector, ProbabilityVector> make_marginals(
    const Vector& raw_rows, const Vector& raw_cols);

/// Nonnegative, finite n x n cost matrix.
class CostMatrix {
 public:
  explicit CostMatrix(Matrix entries);

  /// c_ij = |p_i - q_j|^2 for support points stored one per row.
  static CostMatrix squared_distances(const Matrix& rows, const Matrix& cols);
  static CostMatrix squared_distances(const Matrix& points) {
    return squared_distances(points, points);
  }

  const Matrix& entries() const { return entries_; }
  Index rows() const { return entries_.rows(); }
  Index cols() const { return entries_.cols(); }
  double max_entry() const { return entries_.maxCoeff(); }

 private:
  Matrix entries_;
};

/// Dual potentials of the two marginal constraints. Defined up to additive
/// shifts of either vector.
struct DualPotentials {
  Vector lambda;
  Vector mu;

  static DualPotentials zeros(Index n) {
    return {Vector::Zero(n), Vector::Zero(n)};
  }

  /// Representative with mean(lambda) = 0. The shift is moved onto mu so
  /// every sum lambda_i + mu_j is unchanged.
  DualPotentials canonical() const;
  double norm() const;
};

/// Entropic coupling: n x n nonnegative matrix with unit total mass.
class TransportPlan {
 public:
  TransportPlan(Matrix entries, double gamma);

  const Matrix& entries() const { return entries_; }
  double gamma() const { return gamma_; }

 private:
  Matrix entries_;
  double gamma_;
};

struct MarginalResidual {
  Vector row;  // row sums minus L
  Vector col;  // column sums minus W
  double norm = 0.0;
};

MarginalResidual marginal_residual(const Matrix& plan,
                                   const ProbabilityVector& L,
                                   const ProbabilityVector& W);
inline MarginalResidual marginal_residual(const TransportPlan& plan,
                                          const ProbabilityVector& L,
                                          const ProbabilityVector& W) {
  return marginal_residual(plan.entries(), L, W);
}

/// x_ij = exp((-c_ij + lambda_i + mu_j) / gamma) / Z with sum(x) = 1.
TransportPlan plan_from_duals(const DualPotentials& duals,
                              const CostMatrix& cost, double gamma);

enum class UpdateOrder { gauss_seidel, jacobi };

/// One balancing sweep: lambda from mu, then mu from lambda (from the old
/// lambda in the Jacobi variant). Uses the "-1" exponent offset, so after the
/// lambda half-step the unnormalized plan exp((-c + lambda + mu)/gamma - 1)
/// has row sums L exactly, and after the mu half-step column sums W.
DualPotentials balancing_step(const DualPotentials& duals,
                              const CostMatrix& cost,
                              const ProbabilityVector& L,
                              const ProbabilityVector& W, double gamma,
                              UpdateOrder order = UpdateOrder::gauss_seidel);

struct StoppingRule {
  enum class Kind { residual, certificate, max_iterations };

  Kind kind = Kind::residual;
  double threshold = 1e-8;
  std::size_t max_iterations = 100000;

  static StoppingRule residual(double tol,
                               std::size_t max_iter = 100000) {
    return {Kind::residual, tol, max_iter};
  }
  /// Stops when the inner certificate at accuracy delta holds.
  static StoppingRule certificate(double delta,
                                  std::size_t max_iter = 100000) {
    return {Kind::certificate, delta, max_iter};
  }
  static StoppingRule iterations(std::size_t count) {
    return {Kind::max_iterations, 0.0, count};
  }
};

struct SolveOptions {
  UpdateOrder order = UpdateOrder::gauss_seidel;
  std::optional<DualPotentials> initial;
  /// Called after every sweep with (iteration, residual, duals).
  std::function<void(std::size_t, double, const DualPotentials&)> observer;
  /// Give up (unconverged) once the residual has not reached a new minimum
  /// for this many sweeps, e.g. at the floating-point floor. 0 disables.
  std::size_t stall_window = 500;
};

struct SolveReport {
  TransportPlan plan;
  DualPotentials duals;  // canonical representative
  double value = 0.0;    // gamma * sum x ln x + sum c x on `plan`
  std::size_t iterations = 0;
  double marginal_residual = 0.0;
  bool converged = false;
};

/// gamma * sum x ln x + sum c x with 0 ln 0 = 0.
double entropic_cost(const Matrix& plan, const CostMatrix& cost, double gamma);

SolveReport solve_entropic_ot(const CostMatrix& cost, const ProbabilityVector& L,
                              const ProbabilityVector& W, double gamma,
                              const StoppingRule& stop,
                              const SolveOptions& options = {});

/// Gradient of L -> Delta(L, W): the optimal lambda with zero mean.
/// Throws ToleranceNotReached when the inner solve misses `tol`.
Vector grad_H(const ProbabilityVector& L, const ProbabilityVector& W,
              const CostMatrix& cost, double gamma, double tol);

/// gamma * sum_j W_j ln((1/W_j) sum_i exp((-c_ij + lambda_i)/gamma)).
double dual_H_star(const Vector& lambda, const ProbabilityVector& W,
                   const CostMatrix& cost, double gamma);

/// W-weighted column softmax of (-c + lambda)/gamma.
ProbabilityVector grad_H_star(const Vector& lambda, const ProbabilityVector& W,
                              const CostMatrix& cost, double gamma);

/// Birkhoff-Hilbert projective distance ln(max(u/v) * max(v/u)).
double hilbert_metric(const Vector& u, const Vector& v);

}  // namespace etk

#endif
