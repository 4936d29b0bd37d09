#ifndef ETK_ORACLE_HPP
#define ETK_ORACLE_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>

#include "etk/core_ot.hpp"

namespace etk {

/// Where a pair of (delta, L) constants came from.
enum class ConstantsSource {
  holder_subgradient,  // delta-subgradient route with the nu = 0 Hoelder embedding
  feasible_primal,     // exactly feasible entropy-linear inner solution
  smooth_dual,         // certified smooth dual inner solution
  holder_embedding,    // user-supplied Hoelder constants
  user
};

struct OracleConstants {
  double delta = 0.0;
  std::optional<double> lipschitz;  // nullopt: unknown
  ConstantsSource source = ConstantsSource::user;
};

/// Reply of a (delta, L)-oracle at a single query point y: for all y',
///   0 <= f(y') - F - <G, y' - y> <= (L/2)|y' - y|^2 + delta.
struct InexactOracleReply {
  double F = 0.0;
  Vector G;
  double delta = 0.0;
  std::optional<double> lipschitz;

  // Diagnostics from the inner solver, if any.
  double inner_residual = 0.0;
  std::size_t inner_iterations = 0;
  /// Primal quantity recovered by the inner solve (e.g. a flattened plan);
  /// the universal method averages it along the run.
  Vector primal;
};

/// Oracle queried at y with a requested inner accuracy delta.
using OracleFn =
    std::function<InexactOracleReply(const Vector& y, double delta)>;
/// Oracle with the accuracy already fixed.
using FixedOracleFn = std::function<InexactOracleReply(const Vector& y)>;

FixedOracleFn bind_delta(OracleFn oracle, double delta);

/// L = L_nu * [L_nu (1 - nu) / (2 delta (1 + nu))]^((1 - nu) / (1 + nu)).
double holder_smoothing_constant(double L_nu, double nu, double delta);

struct CertificateCheck {
  bool satisfied = false;
  double residual = 0.0;   // |Ax - b|_2
  double dual_norm = 0.0;  // |(lambda, mu)|_2 on the canonical representative
  double product = 0.0;    // residual * dual_norm
};

/// |Ax - b| * |(lambda, mu)| <= delta / 2 and |Ax - b| <= delta.
bool certificate_holds(double residual, double dual_norm, double delta);

CertificateCheck inner_stop_criterion(const DualPotentials& duals,
                                      const TransportPlan& plan,
                                      const ProbabilityVector& L,
                                      const ProbabilityVector& W,
                                      double delta);

/// Result of solving the inner problem at a fixed outer point y.
///
/// For a min-type outer function phi(y) = min_x Phi(x, y), `value` is
/// Phi(x~, y) and `grad_y` is Phi_y(x~, y). For a max-type function
/// psi(y) = max_x Psi(x, y), `value` is Psi(x~, y) and `grad_y` is a
/// subgradient of Psi(x~, .) at y.
struct InnerSolution {
  double value = 0.0;
  Vector grad_y;
  bool certified = false;
  double residual = 0.0;
  double dual_norm = 0.0;
  std::size_t iterations = 0;
  Vector primal;
};

using InnerSolver = std::function<InnerSolution(const Vector& y, double delta)>;

enum class OraclePath {
  /// max-type outer function; F = Psi(x~, y) is already a lower bound.
  max_subgradient,
  /// min-type outer function, delta-subgradient only; F = Phi(x~, y) - 2 delta.
  min_subgradient,
  /// min-type, jointly smooth Phi; F = Phi(x~, y) - 2 delta, constants
  /// (6 delta, 2 L).
  min_smooth,
  /// exactly feasible entropy-linear solution; F = value, constants
  /// (delta, 2 max c).
  exact_feasible,
};

struct OracleSettings {
  OraclePath path = OraclePath::min_smooth;
  /// min_smooth: Lipschitz constant of the joint gradient of Phi.
  /// *_subgradient: bound L_0 on subgradient variation.
  /// exact_feasible: max_ij c_ij.
  std::optional<double> constant;
};

OracleConstants oracle_constants(const OracleSettings& settings, double delta);

/// Wraps an inner solver into an inexact first-order oracle. Throws
/// ToleranceNotReached when the inner solver cannot certify its accuracy.
OracleFn make_inexact_oracle(InnerSolver inner, OracleSettings settings);

/// delta_k = coefficient * eps for p = 0, coefficient * eps / (k + 1) for p = 1.
double scheduled_delta(double eps, int p, std::size_t iteration,
                       double coefficient = 0.1);

struct SamplingBox {
  Vector lower;
  Vector upper;
};

struct InequalityCheck {
  double pass_fraction = 0.0;
  double worst_violation = 0.0;        // max over both sides, >= 0
  double worst_lower_violation = 0.0;  // max of -(f(y') - F - <G, y' - y>)
  double worst_upper_violation = 0.0;
  std::size_t samples = 0;
};

/// Samples (y, y') pairs uniformly in `box` and checks both sides of the
/// oracle inequality against `f_reference`. The reply's own constants are
/// used; an unknown Lipschitz constant skips the upper side.
InequalityCheck check_oracle_inequality(
    const FixedOracleFn& oracle, const std::function<double(const Vector&)>& f_reference,
    const SamplingBox& box, std::size_t samples, std::uint64_t seed = 1);

}  // namespace etk

#endif
