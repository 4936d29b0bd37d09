#ifndef ETK_BARYCENTER_HPP
#define ETK_BARYCENTER_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "etk/core_ot.hpp"
#include "etk/universal_gd.hpp"

namespace etk {

/// m measures on a shared support of size n, with one cost matrix.
struct BarycenterProblem {
  std::vector<ProbabilityVector> measures;
  CostMatrix cost;
  double gamma = 1.0;

  BarycenterProblem(std::vector<ProbabilityVector> measures, CostMatrix cost,
                    double gamma = 1.0);

  std::size_t count() const { return measures.size(); }
  /// Non-fatal diagnostics, e.g. gamma below 0.01 where the dual curvature
  /// grows like 1/gamma.
  std::vector<std::string> warnings() const;
  Index support_size() const { return cost.rows(); }
};

/// Potentials lambda^1..lambda^{m-1}; lambda^m = -sum_k lambda^k is implicit.
struct DualState {
  std::vector<Vector> potentials;

  /// All m potentials including the implicit last one.
  std::vector<Vector> full() const;
  Vector flatten() const;
  static DualState unflatten(const Vector& flat, std::size_t blocks, Index n);
};

struct ObjectiveValue {
  double value = 0.0;  // sum_k H_{W_k}(L), lower estimate from the duals
  Vector gradient;     // sum of zero-mean potentials
  std::size_t inner_iterations = 0;
  double max_residual = 0.0;
};

/// sum_k H_{W_k}(L) and its gradient sum_k lambda*_k. Each inner solve must
/// reach `tol` in marginal residual. `threads` > 1 evaluates the m terms
/// concurrently; they are always summed in index order.
ObjectiveValue barycenter_objective(const ProbabilityVector& L,
                                    const BarycenterProblem& problem,
                                    double tol, int threads = 1);

struct BarycenterOptions {
  double eps = 1e-6;
  int p = 1;
  std::size_t max_iter = 100000;
  int threads = 1;
  /// Return the single measure itself when m = 1, the unsmoothed
  /// convention. When false the smoothed objective is minimized.
  bool single_measure_identity = true;
  std::optional<DualState> warm_start;  // dual solver only
  std::function<void(const IterationRecord&)> observer;
};

struct BarycenterResult {
  ProbabilityVector barycenter;
  RunHistory history;
  std::optional<DualState> dual;
  /// Dual solver: sup-norm distance of each conjugate gradient from the
  /// averaged recovery, one entry per measure.
  std::vector<double> recovery_spread;
  double max_recovery_spread = 0.0;
  /// -D(lambda), a lower bound on the optimal objective (dual solver only).
  std::optional<double> dual_bound;
};

BarycenterResult barycenter_primal(const BarycenterProblem& problem,
                                   const BarycenterOptions& options);

/// sum_{k<m} H*_{W_k}(lambda^k) + H*_{W_m}(-sum_{k<m} lambda^k).
double dual_objective(const DualState& state, const BarycenterProblem& problem);
/// Block k: grad H*_{W_k}(lambda^k) - grad H*_{W_m}(-sum lambda).
Vector dual_gradient(const DualState& state, const BarycenterProblem& problem,
                     int threads = 1);

BarycenterResult barycenter_dual(const BarycenterProblem& problem,
                                 const BarycenterOptions& options);

/// Starting point after sliding the window by r measures: drops the first r
/// potentials and appends r copies of lambda^m. Window size is
/// prev.potentials.size() + 1.
DualState warm_start_shift(const DualState& prev, std::size_t r);

/// Objective at a candidate barycenter with tight inner solves.
double evaluate_barycenter(const ProbabilityVector& L,
                           const BarycenterProblem& problem,
                           double tol = 1e-10);

}  // namespace etk

#endif
