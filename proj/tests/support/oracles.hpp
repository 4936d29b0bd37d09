// Reference computations for the tests. Deliberately naive: plain kernel
// scaling instead of log-domain balancing, direct sums instead of
// log-sum-exp, and central differences instead of analytic gradients.
#ifndef ETK_TESTS_ORACLES_HPP
#define ETK_TESTS_ORACLES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ScalingResult {
  Mat plan;
  Vec u, v;
  int sweeps = 0;
};

// Sinkhorn-Knopp on K = exp(-c / gamma): P = diag(u) K diag(v).
inline ScalingResult kernel_scaling(const Mat& c, const Vec& L, const Vec& W,
                                    double gamma, double tol = 1e-13,
                                    int max_sweeps = 200000) {
  const Mat K = (-c / gamma).array().exp().matrix();
  ScalingResult r;
  r.u = Vec::Ones(L.size());
  r.v = Vec::Ones(W.size());
  for (r.sweeps = 0; r.sweeps < max_sweeps; ++r.sweeps) {
    r.u = L.array() / (K * r.v).array();
    r.v = W.array() / (K.transpose() * r.u).array();
    const Vec rows = r.u.asDiagonal() * K * r.v;
    if ((rows - L).lpNorm<1>() < tol) break;
  }
  r.plan = r.u.asDiagonal() * K * r.v.asDiagonal();
  return r;
}

inline double entropic_value(const Mat& plan, const Mat& c, double gamma) {
  double v = 0.0;
  for (Eigen::Index i = 0; i < plan.size(); ++i) {
    const double x = plan.data()[i];
    v += c.data()[i] * x;
    if (x > 0.0) v += gamma * x * std::log(x);
  }
  return v;
}

// min over plans with marginals (L, W) of <c, x> + gamma sum x ln x.
inline double smoothed_distance(const Mat& c, const Vec& L, const Vec& W,
                                double gamma) {
  return entropic_value(kernel_scaling(c, L, W, gamma).plan, c, gamma);
}

// n = 2: the plan has one free entry t = x11. Bisection on the derivative
// gamma ln(x11 x22 / (x12 x21)) + c11 - c12 - c21 + c22.
inline Mat two_point_plan(const Mat& c, const Vec& L, const Vec& W,
                          double gamma) {
  const double lo0 = std::max(0.0, L[0] + W[0] - 1.0);
  const double hi0 = std::min(L[0], W[0]);
  auto plan = [&](double t) {
    Mat x(2, 2);
    x << t, L[0] - t, W[0] - t, 1.0 - L[0] - W[0] + t;
    return x;
  };
  auto slope = [&](double t) {
    const Mat x = plan(t);
    return gamma * std::log(x(0, 0) * x(1, 1) / (x(0, 1) * x(1, 0))) + c(0, 0) -
           c(0, 1) - c(1, 0) + c(1, 1);
  };
  double lo = lo0, hi = hi0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (slope(mid) > 0.0 ? hi : lo) = mid;
  }
  return plan(0.5 * (lo + hi));
}

// gamma sum_j W_j ln((1/W_j) sum_i exp((lambda_i - c_ij)/gamma)), direct sums.
inline double conjugate(const Vec& lambda, const Vec& W, const Mat& c,
                        double gamma) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      s += std::exp((lambda[i] - c(i, j)) / gamma);
    total += W[j] * std::log(s / W[j]);
  }
  return gamma * total;
}

inline Vec central_difference(const std::function<double(const Vec&)>& f,
                              const Vec& x, double h) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

// Derivative of f along the simplex direction e_i - mean(e), i.e. the
// tangent-projected gradient.
inline Vec simplex_difference(const std::function<double(const Vec&)>& f,
                              const Vec& x, double h) {
  const Eigen::Index n = x.size();
  Vec g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec d = Vec::Constant(n, -1.0 / n);
    d[i] += 1.0;
    g[i] = (f(x + h * d) - f(x - h * d)) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Vec& a, const Vec& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

// Ordinary least squares of y on x; returns (slope, R^2).
inline std::pair<double, double> linear_fit(const std::vector<double>& x,
                                            const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  const double cov = sxy - sx * sy / n;
  const double vx = sxx - sx * sx / n;
  const double vy = syy - sy * sy / n;
  const double slope = cov / vx;
  const double r2 = vy > 0.0 ? cov * cov / (vx * vy) : 1.0;
  return {slope, r2};
}

inline Vec random_weights(std::mt19937_64& rng, Eigen::Index n,
                          double floor = 0.2) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = floor + u(rng);
  return w / w.sum();
}

inline Mat random_points(std::mt19937_64& rng, Eigen::Index n, int d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Mat p(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) p(i, k) = u(rng);
  return p;
}

inline Mat squared_distances(const Mat& p) {
  Mat c(p.rows(), p.rows());
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.rows(); ++j)
      c(i, j) = (p.row(i) - p.row(j)).squaredNorm();
  return c;
}

// Cost whose identical-measure barycenter is exactly W: d plus the row shift
// -gamma ln u, with u the row scaling of W's self-transport under d. Then
// W is stationary for H_W under the shifted cost.
inline Mat self_consistent_cost(const Mat& d, const Vec& W, double gamma) {
  const ScalingResult s = kernel_scaling(d, W, W, gamma, 1e-15);
  Vec shift = -gamma * s.u.array().log().matrix();
  shift.array() -= shift.minCoeff();
  Mat c = d;
  for (Eigen::Index i = 0; i < c.rows(); ++i) c.row(i).array() += shift[i];
  return c;
}

}  // namespace oracle

#endif
