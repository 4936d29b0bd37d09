#include "etk/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "etk/errors.hpp"

namespace etk {

FixedOracleFn bind_delta(OracleFn oracle, double delta) {
  return [oracle = std::move(oracle), delta](const Vector& y) {
    return oracle(y, delta);
  };
}

double holder_smoothing_constant(double L_nu, double nu, double delta) {
  if (!(nu >= 0.0 && nu <= 1.0))
    throw std::invalid_argument("nu must lie in [0, 1]");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (!(L_nu > 0.0)) throw std::invalid_argument("L_nu must be positive");
  if (nu == 1.0) return L_nu;
  const double base = L_nu * (1.0 - nu) / (2.0 * delta * (1.0 + nu));
  return L_nu * std::pow(base, (1.0 - nu) / (1.0 + nu));
}

bool certificate_holds(double residual, double dual_norm, double delta) {
  return residual * dual_norm <= 0.5 * delta && residual <= delta;
}

CertificateCheck inner_stop_criterion(const DualPotentials& duals,
                                      const TransportPlan& plan,
                                      const ProbabilityVector& L,
                                      const ProbabilityVector& W,
                                      double delta) {
  CertificateCheck check;
  check.residual = marginal_residual(plan, L, W).norm;
  check.dual_norm = duals.canonical().norm();
  check.product = check.residual * check.dual_norm;
  check.satisfied = certificate_holds(check.residual, check.dual_norm, delta);
  return check;
}

OracleConstants oracle_constants(const OracleSettings& settings,
                                 double delta) {
  OracleConstants out;
  switch (settings.path) {
    case OraclePath::min_smooth:
      out.delta = 6.0 * delta;
      if (settings.constant) out.lipschitz = 2.0 * *settings.constant;
      out.source = ConstantsSource::smooth_dual;
      break;
    case OraclePath::min_subgradient:
      // 2 delta from the value offset plus delta of Hoelder slack.
      out.delta = 3.0 * delta;
      if (settings.constant)
        out.lipschitz = holder_smoothing_constant(*settings.constant, 0.0, delta);
      out.source = ConstantsSource::holder_subgradient;
      break;
    case OraclePath::max_subgradient:
      out.delta = 2.0 * delta;
      if (settings.constant)
        out.lipschitz = holder_smoothing_constant(*settings.constant, 0.0, delta);
      out.source = ConstantsSource::holder_subgradient;
      break;
    case OraclePath::exact_feasible:
      out.delta = delta;
      if (settings.constant) out.lipschitz = 2.0 * *settings.constant;
      out.source = ConstantsSource::feasible_primal;
      break;
  }
  return out;
}

OracleFn make_inexact_oracle(InnerSolver inner, OracleSettings settings) {
  return [inner = std::move(inner), settings](const Vector& y, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    InnerSolution sol = inner(y, delta);
    if (!sol.certified)
      throw ToleranceNotReached("inner solver failed its certificate",
                                sol.residual, sol.dual_norm, sol.iterations);
    const OracleConstants constants = oracle_constants(settings, delta);
    InexactOracleReply reply;
    const bool offset = settings.path == OraclePath::min_smooth ||
                        settings.path == OraclePath::min_subgradient;
    reply.F = offset ? sol.value - 2.0 * delta : sol.value;
    reply.G = std::move(sol.grad_y);
    reply.delta = constants.delta;
    reply.lipschitz = constants.lipschitz;
    reply.inner_residual = sol.residual;
    reply.inner_iterations = sol.iterations;
    reply.primal = std::move(sol.primal);
    return reply;
  };
}

double scheduled_delta(double eps, int p, std::size_t iteration,
                       double coefficient) {
  if (p == 0) return coefficient * eps;
  return coefficient * eps / static_cast<double>(iteration + 1);
}

InequalityCheck check_oracle_inequality(
    const FixedOracleFn& oracle,
    const std::function<double(const Vector&)>& f_reference,
    const SamplingBox& box, std::size_t samples, std::uint64_t seed) {
  if (box.lower.size() != box.upper.size())
    throw std::invalid_argument("sampling box bounds differ in size");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] {
    Vector y(box.lower.size());
    for (Index i = 0; i < y.size(); ++i)
      y[i] = box.lower[i] + unit(rng) * (box.upper[i] - box.lower[i]);
    return y;
  };

  InequalityCheck out;
  out.samples = samples;
  std::size_t passed = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const Vector y = draw();
    const Vector y_probe = draw();
    const InexactOracleReply reply = oracle(y);
    const Vector h = y_probe - y;
    const double f_probe = f_reference(y_probe);
    const double gap = f_probe - reply.F - reply.G.dot(h);
    // Round-off allowance so exact oracles pass exactly.
    const double slack = 1e-12 * (1.0 + std::abs(f_probe));
    const double lower_violation = std::max(0.0, -gap - slack);
    double upper_violation = 0.0;
    if (reply.lipschitz)
      upper_violation =
          std::max(0.0, gap - 0.5 * *reply.lipschitz * h.squaredNorm() -
                            reply.delta - slack);
    out.worst_lower_violation =
        std::max(out.worst_lower_violation, lower_violation);
    out.worst_upper_violation =
        std::max(out.worst_upper_violation, upper_violation);
    if (lower_violation == 0.0 && upper_violation == 0.0) ++passed;
  }
  out.worst_violation =
      std::max(out.worst_lower_violation, out.worst_upper_violation);
  out.pass_fraction =
      samples == 0 ? 1.0
                   : static_cast<double>(passed) / static_cast<double>(samples);
  return out;
}

}  // namespace etk
