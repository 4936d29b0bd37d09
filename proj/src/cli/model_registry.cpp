#include "etk/model_registry.hpp"

#include "etk/io.hpp"

namespace etk {

namespace {

Matrix json_matrix(const nlohmann::json& j, const char* field) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw io::InputError(std::string("'") + field + "' must be a nested array");
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(j.front().size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != j.front().size())
      throw io::InputError(std::string("'") + field + "' is ragged");
    for (std::size_t k = 0; k < j[i].size(); ++k)
      m(static_cast<Index>(i), static_cast<Index>(k)) = j[i][k].get<double>();
  }
  return m;
}

}  // namespace

ModelRegistry& ModelRegistry::instance() {
  static ModelRegistry registry;
  return registry;
}

ModelRegistry::ModelRegistry() { factories_["toy"] = make_toy_model; }

void ModelRegistry::add(const std::string& name, ModelFactory factory) {
  factories_[name] = std::move(factory);
}

bool ModelRegistry::contains(const std::string& name) const {
  return factories_.count(name) > 0;
}

std::shared_ptr<const CostModel> ModelRegistry::make(
    const std::string& name, const nlohmann::json& config) const {
  const auto it = factories_.find(name);
  if (it == factories_.end()) {
    std::string known;
    for (const auto& [k, v] : factories_) known += (known.empty() ? "" : ", ") + k;
    throw io::InputError("unknown model '" + name + "' (known: " + known + ")");
  }
  return it->second(config);
}

std::vector<std::string> ModelRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : factories_) out.push_back(k);
  return out;
}

std::shared_ptr<const CostModel> make_toy_model(const nlohmann::json& config) {
  try {
    Matrix base = json_matrix(config.at("base"), "base");
    const auto& sj = config.at("sensitivities");
    const Vector y_hat = [&] {
      const auto& yj = config.at("y_hat");
      Vector v(static_cast<Index>(yj.size()));
      for (std::size_t k = 0; k < yj.size(); ++k)
        v[static_cast<Index>(k)] = yj[k].get<double>();
      return v;
    }();
    const Index d = y_hat.size();
    std::vector<Matrix> sens(static_cast<std::size_t>(d),
                             Matrix::Zero(base.rows(), base.cols()));
    if (!sj.is_array() || sj.size() != static_cast<std::size_t>(base.rows()))
      throw io::InputError("'sensitivities' must have one row per support point");
    for (Index i = 0; i < base.rows(); ++i) {
      const auto& row = sj[static_cast<std::size_t>(i)];
      if (!row.is_array() || row.size() != static_cast<std::size_t>(base.cols()))
        throw io::InputError("'sensitivities' row " + std::to_string(i) +
                             " has the wrong length");
      for (Index j = 0; j < base.cols(); ++j) {
        const auto& s = row[static_cast<std::size_t>(j)];
        if (!s.is_array() || s.size() != static_cast<std::size_t>(d))
          throw io::InputError("sensitivity (" + std::to_string(i) + ", " +
                               std::to_string(j) + ") must have length " +
                               std::to_string(d));
        for (Index k = 0; k < d; ++k)
          sens[static_cast<std::size_t>(k)](i, j) =
              s[static_cast<std::size_t>(k)].get<double>();
      }
    }
    return toy_cost_model(CostMatrix(std::move(base)), std::move(sens),
                          config.at("beta").get<double>(), y_hat);
  } catch (const nlohmann::json::exception& e) {
    throw io::InputError(std::string("toy model config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw io::InputError(std::string("toy model config: ") + e.what());
  }
}

}  // namespace etk
