#ifndef ETK_UNIVERSAL_GD_HPP
#define ETK_UNIVERSAL_GD_HPP

#include <cstddef>
#include <functional>
#include <vector>

#include "etk/core_ot.hpp"
#include "etk/oracle.hpp"

namespace etk {

enum class ProxKind { euclidean_free, euclidean_box, entropic_simplex };

/// Feasible set together with its prox (Bregman) structure.
struct ProxSetup {
  ProxKind kind = ProxKind::euclidean_free;
  Vector lower;  // euclidean_box only
  Index dim = 0;

  static ProxSetup free(Index dim) { return {ProxKind::euclidean_free, {}, dim}; }
  static ProxSetup box(Vector lower) {
    const Index d = lower.size();
    return {ProxKind::euclidean_box, std::move(lower), d};
  }
  static ProxSetup simplex(Index dim) {
    return {ProxKind::entropic_simplex, {}, dim};
  }

  bool feasible(const Vector& y) const;
};

/// argmin_x { <g, x> + xi(y, x) / step } over the feasible set, with xi the
/// Euclidean or Kullback-Leibler Bregman distance.
Vector prox_step(const ProxSetup& prox, const Vector& y, const Vector& g,
                 double step);

struct IterationRecord {
  std::size_t iteration = 0;
  double objective = 0.0;  // best upper estimate F + delta so far
  double curvature = 0.0;  // accepted M_k
  double delta = 0.0;      // requested inner accuracy
  double gap = 0.0;        // model-gap certificate
  double inner_residual = 0.0;
  std::size_t inner_iterations = 0;
  double wall_time = 0.0;  // seconds since start
  Vector point;            // point whose gradient entered the model
};

struct RunHistory {
  std::vector<IterationRecord> records;
  Vector final_point;
  std::size_t iterations = 0;
  std::size_t oracle_calls = 0;
  std::size_t inner_iterations = 0;
  bool converged = false;
  double final_gap = 0.0;
  double best_objective = 0.0;

  // Weighted averages along the run, with the method's model weights.
  Vector averaged_point;
  Vector averaged_gradient;
  Vector averaged_primal;
};

struct UniversalOptions {
  double eps = 1e-6;
  int p = 1;  // 0: primal universal gradient, 1: fast universal gradient
  std::size_t max_iter = 100000;
  double initial_curvature = 1.0;
  std::size_t max_doublings = 60;
  double delta_coefficient = 0.1;
  /// Half-width of the box around y0 over which the gap certificate
  /// minimizes the averaged linear model. Zero picks it adaptively as
  /// max(1, 2 * largest excursion from y0). Ignored on the simplex.
  double localization_radius = 0.0;
  /// Optional problem-specific lower bound on min f, computed from the
  /// model-weighted average of the oracle's primal vectors. Must be valid for
  /// any input; the certificate uses the larger of it and the model bound.
  std::function<double(const Vector& averaged_primal)> lower_bound;
  std::function<void(const IterationRecord&)> observer;
};

struct UniversalResult {
  Vector point;
  RunHistory history;
};

/// Minimizes a convex function given only through an inexact oracle. No
/// Lipschitz or Hoelder constant is required: the local curvature estimate
/// M_k is found by doubling from the previous (halved) value.
UniversalResult universal_method(const OracleFn& oracle, const ProxSetup& prox,
                                 const Vector& y0,
                                 const UniversalOptions& options);

}  // namespace etk

#endif
