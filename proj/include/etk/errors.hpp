#ifndef ETK_ERRORS_HPP
#define ETK_ERRORS_HPP

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>

namespace etk {

namespace detail {
inline std::string sci(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}
}  // namespace detail

/// A plan entry whose exponent stayed non-finite after log-domain
/// stabilization.
class OverflowError : public std::overflow_error {
 public:
  OverflowError(std::size_t row, std::size_t col)
      : std::overflow_error("non-finite exponent at entry (" +
                            std::to_string(row) + ", " + std::to_string(col) +
                            ")"),
        row_(row),
        col_(col) {}

  std::size_t row() const { return row_; }
  std::size_t col() const { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

/// An inner solve stopped before reaching the requested accuracy.
class ToleranceNotReached : public std::runtime_error {
 public:
  ToleranceNotReached(const std::string& what, double residual,
                      double dual_norm = 0.0, std::size_t iterations = 0)
      : std::runtime_error(what + " (residual " + detail::sci(residual) +
                           ", dual norm " + detail::sci(dual_norm) + ")"),
        residual_(residual),
        dual_norm_(dual_norm),
        iterations_(iterations) {}

  double residual() const { return residual_; }
  double dual_norm() const { return dual_norm_; }
  std::size_t iterations() const { return iterations_; }

 private:
  double residual_;
  double dual_norm_;
  std::size_t iterations_;
};

/// The universal method's line search could not find a finite local
/// curvature estimate.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t iteration,
                  double curvature)
      : std::runtime_error(what + " at iteration " + std::to_string(iteration) +
                           " (last curvature estimate " +
                           detail::sci(curvature) + ")"),
        iteration_(iteration),
        curvature_(curvature) {}

  std::size_t iteration() const { return iteration_; }
  double curvature() const { return curvature_; }

 private:
  std::size_t iteration_;
  double curvature_;
};

}  // namespace etk

#endif
