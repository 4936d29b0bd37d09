#include "etk/universal_gd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "etk/errors.hpp"

namespace etk {

bool ProxSetup::feasible(const Vector& y) const {
  if (y.size() != dim || !y.allFinite()) return false;
  switch (kind) {
    case ProxKind::euclidean_free:
      return true;
    case ProxKind::euclidean_box:
      return (y.array() >= lower.array()).all();
    case ProxKind::entropic_simplex:
      return (y.array() > 0.0).all() && std::abs(y.sum() - 1.0) <= 1e-12;
  }
  return false;
}

Vector prox_step(const ProxSetup& prox, const Vector& y, const Vector& g,
                 double step) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  if (y.size() != g.size())
    throw std::invalid_argument("point and gradient differ in size");
  switch (prox.kind) {
    case ProxKind::euclidean_free:
      return y - step * g;
    case ProxKind::euclidean_box:
      return (y - step * g).cwiseMax(prox.lower);
    case ProxKind::entropic_simplex: {
      // y_i exp(-step g_i) / Z, shifted by max for stability.
      Vector logits = y.array().log().matrix() - step * g;
      logits.array() -= logits.maxCoeff();
      Vector out = logits.array().exp().matrix();
      out = out.cwiseMax(kMinMass);
      return out / out.sum();
    }
  }
  return y;
}

namespace {

// Norm used in the quadratic upper model: Euclidean, or l1 for the entropic
// setup (KL is 1-strongly convex in l1 on the simplex).
double model_norm_sq(const ProxSetup& prox, const Vector& h) {
  if (prox.kind == ProxKind::entropic_simplex) {
    const double l1 = h.lpNorm<1>();
    return l1 * l1;
  }
  return h.squaredNorm();
}

// Running weighted linear model l(z) = (constant + <slope, z>) / weight.
struct LinearModel {
  double weight = 0.0;
  double constant = 0.0;
  Vector slope;
  Vector point_sum;
  Vector primal_sum;

  void add(double a, const InexactOracleReply& r, const Vector& x) {
    if (slope.size() == 0) {
      slope = Vector::Zero(x.size());
      point_sum = Vector::Zero(x.size());
    }
    weight += a;
    constant += a * (r.F - r.G.dot(x));
    slope += a * r.G;
    point_sum += a * x;
    if (r.primal.size() > 0) {
      if (primal_sum.size() == 0) primal_sum = Vector::Zero(r.primal.size());
      primal_sum += a * r.primal;
    }
  }

  // min of the model over the localization set.
  double minimum(const ProxSetup& prox, const Vector& center,
                 double radius) const {
    double best = constant;
    switch (prox.kind) {
      case ProxKind::entropic_simplex:
        best += slope.minCoeff();
        break;
      case ProxKind::euclidean_free:
      case ProxKind::euclidean_box:
        for (Index i = 0; i < slope.size(); ++i) {
          double lo = center[i] - radius;
          if (prox.kind == ProxKind::euclidean_box)
            lo = std::max(lo, prox.lower[i]);
          const double hi = center[i] + radius;
          best += slope[i] * (slope[i] > 0.0 ? lo : hi);
        }
        break;
    }
    return best / weight;
  }
};

class Runner {
 public:
  Runner(const OracleFn& oracle, const ProxSetup& prox, const Vector& y0,
         const UniversalOptions& options)
      : oracle_(oracle),
        prox_(prox),
        y0_(y0),
        opt_(options),
        start_(std::chrono::steady_clock::now()) {
    if (!(opt_.eps > 0.0)) throw std::invalid_argument("eps must be positive");
    if (opt_.p != 0 && opt_.p != 1)
      throw std::invalid_argument("p must be 0 or 1");
    if (!prox_.feasible(y0_))
      throw std::invalid_argument("starting point is not feasible");
    best_point_ = y0_;
  }

  UniversalResult run() {
    if (opt_.p == 0)
      run_primal();
    else
      run_fast();
    RunHistory& h = history_;
    h.final_point = best_point_;
    h.best_objective = best_upper_;
    if (model_.weight > 0.0) {
      h.averaged_point = model_.point_sum / model_.weight;
      h.averaged_gradient = model_.slope / model_.weight;
      if (model_.primal_sum.size() > 0)
        h.averaged_primal = model_.primal_sum / model_.weight;
    }
    return {best_point_, std::move(history_)};
  }

 private:
  InexactOracleReply query(const Vector& y, double delta) {
    InexactOracleReply r = oracle_(y, delta);
    ++history_.oracle_calls;
    history_.inner_iterations += r.inner_iterations;
    last_inner_residual_ = r.inner_residual;
    last_inner_iterations_ = r.inner_iterations;
    if (r.G.size() != y.size())
      throw std::invalid_argument("oracle gradient has the wrong size");
    const double upper = r.F + r.delta;
    if (std::isfinite(upper) && upper < best_upper_) {
      best_upper_ = upper;
      best_point_ = y;
    }
    max_excursion_ =
        std::max(max_excursion_, (y - y0_).lpNorm<Eigen::Infinity>());
    return r;
  }

  double radius() const {
    if (opt_.localization_radius > 0.0) return opt_.localization_radius;
    return std::max(1.0, 2.0 * max_excursion_);
  }

  // Records iteration k and reports whether the certificate reached eps.
  bool finish_iteration(std::size_t k, double curvature, double delta,
                        const Vector& point) {
    double lower = model_.minimum(prox_, y0_, radius());
    if (opt_.lower_bound && model_.primal_sum.size() > 0)
      lower = std::max(lower, opt_.lower_bound(model_.primal_sum / model_.weight));
    const double gap = best_upper_ - lower;
    IterationRecord rec;
    rec.iteration = k;
    rec.objective = best_upper_;
    rec.curvature = curvature;
    rec.delta = delta;
    rec.gap = gap;
    rec.inner_residual = last_inner_residual_;
    rec.inner_iterations = last_inner_iterations_;
    rec.wall_time = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start_)
                        .count();
    rec.point = point;
    if (opt_.observer) opt_.observer(rec);
    history_.records.push_back(std::move(rec));
    history_.iterations = k + 1;
    history_.final_gap = gap;
    if (gap <= opt_.eps) {
      history_.converged = true;
      return true;
    }
    return false;
  }

  [[noreturn]] void diverged(std::size_t k, double curvature) const {
    throw DivergenceError(
        "line search found no finite local curvature after " +
            std::to_string(opt_.max_doublings) + " doublings",
        k, curvature);
  }

  void run_primal() {
    double M = opt_.initial_curvature;
    const double delta = scheduled_delta(opt_.eps, 0, 0, opt_.delta_coefficient);
    Vector x = y0_;
    InexactOracleReply rx = query(x, delta);
    for (std::size_t k = 0; k < opt_.max_iter; ++k) {
      Vector x_next;
      InexactOracleReply r_next;
      std::size_t doublings = 0;
      for (;; ++doublings) {
        if (doublings > opt_.max_doublings) diverged(k, M);
        x_next = prox_step(prox_, x, rx.G, 1.0 / M);
        r_next = query(x_next, delta);
        const Vector h = x_next - x;
        const double bound = rx.F + rx.G.dot(h) + 0.5 * M * model_norm_sq(prox_, h) +
                             0.5 * opt_.eps + delta;
        if (std::isfinite(r_next.F) && r_next.F <= bound) break;
        M *= 2.0;
      }
      model_.add(1.0 / M, rx, x);
      const double accepted = M;
      const Vector point = x;
      x = std::move(x_next);
      rx = std::move(r_next);
      M *= 0.5;
      if (finish_iteration(k, accepted, delta, point)) return;
    }
  }

  void run_fast() {
    double M = opt_.initial_curvature;
    double A = 0.0;
    Vector v = y0_;
    Vector y = y0_;
    for (std::size_t k = 0; k < opt_.max_iter; ++k) {
      const double delta =
          scheduled_delta(opt_.eps, 1, k, opt_.delta_coefficient);
      double a = 0.0;
      double tau = 0.0;
      Vector x, y_next;
      InexactOracleReply rx;
      std::size_t doublings = 0;
      for (;; ++doublings) {
        if (doublings > opt_.max_doublings) diverged(k, M);
        // a^2 / (A + a) = 1 / M
        a = (1.0 + std::sqrt(1.0 + 4.0 * M * A)) / (2.0 * M);
        tau = a / (A + a);
        x = tau * v + (1.0 - tau) * y;
        rx = query(x, delta);
        const Vector x_hat = prox_step(prox_, v, rx.G, a);
        y_next = tau * x_hat + (1.0 - tau) * y;
        if (prox_.kind == ProxKind::entropic_simplex) y_next /= y_next.sum();
        const InexactOracleReply ry = query(y_next, delta);
        const Vector h = y_next - x;
        const double bound = rx.F + rx.G.dot(h) +
                             0.5 * M * model_norm_sq(prox_, h) +
                             0.5 * opt_.eps * tau + delta;
        if (std::isfinite(ry.F) && std::isfinite(rx.F) && ry.F <= bound) break;
        M *= 2.0;
      }
      model_.add(a, rx, x);
      A += a;
      v = prox_step(prox_, y0_, model_.slope, 1.0);
      y = std::move(y_next);
      const double accepted = M;
      M *= 0.5;
      if (finish_iteration(k, accepted, delta, x)) return;
    }
  }

  const OracleFn& oracle_;
  const ProxSetup& prox_;
  Vector y0_;
  UniversalOptions opt_;
  std::chrono::steady_clock::time_point start_;

  RunHistory history_;
  LinearModel model_;
  Vector best_point_;
  double best_upper_ = std::numeric_limits<double>::infinity();
  double max_excursion_ = 0.0;
  double last_inner_residual_ = 0.0;
  std::size_t last_inner_iterations_ = 0;
};

}  // namespace

UniversalResult universal_method(const OracleFn& oracle, const ProxSetup& prox,
                                 const Vector& y0,
                                 const UniversalOptions& options) {
  return Runner(oracle, prox, y0, options).run();
}

}  // namespace etk
