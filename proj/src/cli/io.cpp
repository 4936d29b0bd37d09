#include "etk/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace etk::io {

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view field, const std::string& path,
                    std::size_t line) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto [end, ec] =
      std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || end != field.data() + field.size())
    throw ParseError(path, line, "not a number: '" + std::string(field) + "'");
  return v;
}

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(),
                            text.begin() + static_cast<std::ptrdiff_t>(offset),
                            '\n'));
}

Vector to_vector(const nlohmann::json& j, const std::string& source,
                 const char* field) {
  if (!j.is_array())
    throw ParseError(source, 0, std::string("'") + field + "' must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ParseError(source, 0, std::string("'") + field + "' entry " +
                                      std::to_string(i) + " is not a number");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

}  // namespace

Matrix read_csv_matrix(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + name);

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = body.find(',', start);
      row.push_back(parse_double(body.substr(start, comma - start), name, number));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(name, number,
                       "expected " + std::to_string(rows.front().size()) +
                           " columns, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(name, number, "empty matrix");

  Matrix m(static_cast<Index>(rows.size()),
           static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

void write_csv_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  char buf[32];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j > 0) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

CostMatrix read_cost(const std::filesystem::path& path) {
  Matrix m = read_csv_matrix(path);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (!std::isfinite(m(i, j)) || m(i, j) < 0.0)
        throw InputError(path.string() + ": cost entry (" + std::to_string(i) +
                         ", " + std::to_string(j) +
                         ") is negative or not finite");
  return CostMatrix(std::move(m));
}

MeasureFile parse_measure(const std::string& text, const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0),
                     e.what());
  }
  if (!j.is_object() || !j.contains("weights"))
    throw ParseError(source, 1, "expected an object with a 'weights' array");

  MeasureFile out;
  out.source = source;
  out.weights = to_vector(j["weights"], source, "weights");
  if (out.weights.size() == 0) throw ParseError(source, 1, "no weights");
  if (j.contains("points")) {
    const auto& pts = j["points"];
    if (!pts.is_array() || pts.size() != static_cast<std::size_t>(out.weights.size()))
      throw ParseError(source, 1, "'points' must hold one point per weight");
    const std::size_t d = pts.front().is_array() ? pts.front().size() : 0;
    if (d == 0) throw ParseError(source, 1, "points must be nonempty arrays");
    Matrix p(out.weights.size(), static_cast<Index>(d));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Vector row = to_vector(pts[i], source, "points");
      if (static_cast<std::size_t>(row.size()) != d)
        throw ParseError(source, 1, "point " + std::to_string(i) +
                                        " has the wrong dimension");
      p.row(static_cast<Index>(i)) = row.transpose();
    }
    out.points = std::move(p);
  }
  return out;
}

MeasureFile read_measure(const std::filesystem::path& path) {
  return parse_measure(slurp(path), path.string());
}

std::vector<MeasureFile> read_measure_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw InputError(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no *.json measures in " + dir.string());
  std::vector<MeasureFile> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(read_measure(f));
  return out;
}

ProbabilityVector to_probability(const MeasureFile& m) {
  if (!m.weights.allFinite() || (m.weights.array() < 0.0).any())
    throw InputError(m.source + ": weights must be finite and nonnegative");
  try {
    return ProbabilityVector(m.weights);
  } catch (const std::invalid_argument& e) {
    throw InputError(m.source + ": " + e.what());
  }
}

CostMatrix cost_from_points(const MeasureFile& rows, const MeasureFile& cols) {
  if (!rows.points || !cols.points)
    throw InputError("no cost given and the measures carry no support points");
  if (rows.points->cols() != cols.points->cols())
    throw InputError("support points of " + rows.source + " and " +
                     cols.source + " differ in dimension");
  return CostMatrix::squared_distances(*rows.points, *cols.points);
}

}  // namespace etk::io
