#ifndef ETK_IO_HPP
#define ETK_IO_HPP

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "etk/core_ot.hpp"

namespace etk::io {

/// Bad or inconsistent user input. The CLI maps it to exit status 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file; `line` is 1-based, 0 when unknown.
class ParseError : public InputError {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : InputError(path + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Header-free, row-major, comma separated. Blank lines are skipped.
Matrix read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const std::filesystem::path& path, const Matrix& m);

/// Nonnegative cost from CSV; negative entries are a validation error.
CostMatrix read_cost(const std::filesystem::path& path);

/// {"weights": [...]} or {"points": [[...], ...], "weights": [...]}.
struct MeasureFile {
  Vector weights;  // raw, not yet normalized
  std::optional<Matrix> points;
  std::string source;
};

MeasureFile parse_measure(const std::string& text, const std::string& source);
MeasureFile read_measure(const std::filesystem::path& path);
/// Every *.json in `dir`, in file-name order.
std::vector<MeasureFile> read_measure_dir(const std::filesystem::path& dir);

ProbabilityVector to_probability(const MeasureFile& m);
/// Squared distances between the point clouds of two measures.
CostMatrix cost_from_points(const MeasureFile& rows, const MeasureFile& cols);

}  // namespace etk::io

#endif
