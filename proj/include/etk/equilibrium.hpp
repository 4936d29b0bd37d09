#ifndef ETK_EQUILIBRIUM_HPP
#define ETK_EQUILIBRIUM_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "etk/core_ot.hpp"
#include "etk/oracle.hpp"
#include "etk/universal_gd.hpp"

namespace etk {

/// Outer-parameter dependent costs c(y) >= 0 (concave in y) and concave
/// g(y). This is the extension point for network models.
class CostModel {
 public:
  virtual ~CostModel() = default;

  virtual Index support_size() const = 0;
  virtual Index dim() const = 0;

  virtual CostMatrix cost(const Vector& y) const = 0;
  /// One n x n matrix per coordinate k holding d c_ij / d y_k. Nonsmooth
  /// models return a supergradient selection.
  virtual std::vector<Matrix> cost_gradient(const Vector& y) const = 0;
  virtual double g(const Vector& y) const = 0;
  virtual Vector grad_g(const Vector& y) const = 0;

  /// Smooth models take the p = 1 path with the smooth-dual oracle constants;
  /// nonsmooth ones the delta-subgradient path.
  virtual bool smooth() const { return true; }
  /// Lipschitz constant of the joint gradient of the inner dual function,
  /// when known.
  virtual std::optional<double> joint_lipschitz() const { return std::nullopt; }
  /// Bound on the variation of f's subgradients, for nonsmooth models.
  virtual std::optional<double> subgradient_bound() const {
    return std::nullopt;
  }
};

/// Q = { y : y >= lower }.
struct FeasibleSet {
  Vector lower;
};

/// c_ij(y) = c0_ij + <s_ij, y>, g(y) = -(beta/2) |y - y_hat|^2.
class ToyCostModel final : public CostModel {
 public:
  /// `sensitivities[k]` holds s_ij[k] for all (i, j).
  ToyCostModel(CostMatrix base, std::vector<Matrix> sensitivities, double beta,
               Vector y_hat);

  Index support_size() const override { return base_.rows(); }
  Index dim() const override { return y_hat_.size(); }
  CostMatrix cost(const Vector& y) const override;
  std::vector<Matrix> cost_gradient(const Vector& y) const override;
  double g(const Vector& y) const override;
  Vector grad_g(const Vector& y) const override;
  std::optional<double> joint_lipschitz() const override;

  const CostMatrix& base() const { return base_; }
  const std::vector<Matrix>& sensitivities() const { return sens_; }
  double beta() const { return beta_; }
  const Vector& y_hat() const { return y_hat_; }

 private:
  CostMatrix base_;
  std::vector<Matrix> sens_;
  double beta_;
  Vector y_hat_;
};

std::shared_ptr<ToyCostModel> toy_cost_model(CostMatrix base,
                                             std::vector<Matrix> sensitivities,
                                             double beta, Vector y_hat);

/// Everything the outer method needs to know about the inner problem.
struct EquilibriumInputs {
  std::shared_ptr<const CostModel> model;
  ProbabilityVector L;
  ProbabilityVector W;
  double gamma = 1.0;
  std::size_t max_inner_iterations = 100000;
};

/// Phi(lambda, mu, y) = gamma ln sum exp((-c(y) + lambda_i + mu_j)/gamma)
///                      - <lambda, L> - <mu, W> - g(y).
double inner_dual_value(const DualPotentials& duals, const Vector& y,
                        const EquilibriumInputs& in);

/// -sum_ij x_ij grad c_ij(y) - grad g(y).
Vector danskin_gradient(const TransportPlan& plan, const Vector& y,
                        const CostModel& model);

/// Oracle reply for f at y, with the inner balancing solve certified at delta.
InexactOracleReply f_oracle(const Vector& y, const EquilibriumInputs& in,
                            double delta);
OracleFn make_equilibrium_oracle(const EquilibriumInputs& in);

struct EquilibriumOptions {
  std::size_t max_iter = 10000;
  std::optional<Vector> y0;
  double delta_coefficient = 0.1;
  std::function<void(const IterationRecord&)> observer;
};

struct EquilibriumReport {
  Vector y;
  double f = 0.0;  // Phi at the certified duals; within delta above f(y)
  TransportPlan plan;
  DualPotentials duals;
  std::size_t outer_iterations = 0;
  std::size_t inner_iterations = 0;
  bool converged = false;
  /// Model-weighted average of the inner plans along the run.
  Matrix averaged_plan;
  RunHistory history;
};

EquilibriumReport solve_equilibrium(const EquilibriumInputs& in,
                                    const FeasibleSet& Q, double eps, int p,
                                    const EquilibriumOptions& options = {});

}  // namespace etk

#endif
