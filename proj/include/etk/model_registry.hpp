#ifndef ETK_MODEL_REGISTRY_HPP
#define ETK_MODEL_REGISTRY_HPP

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "etk/equilibrium.hpp"
#include "json.hpp"

namespace etk {

/// Builds a cost model from the "model" object of an equilibrium config.
using ModelFactory =
    std::function<std::shared_ptr<const CostModel>(const nlohmann::json&)>;

/// Name -> factory map used by `etk equilibrium --model NAME`. "toy" is
/// registered on first use.
class ModelRegistry {
 public:
  static ModelRegistry& instance();

  void add(const std::string& name, ModelFactory factory);
  bool contains(const std::string& name) const;
  std::shared_ptr<const CostModel> make(const std::string& name,
                                        const nlohmann::json& config) const;
  std::vector<std::string> names() const;

 private:
  ModelRegistry();
  std::map<std::string, ModelFactory> factories_;
};

/// Config keys: "base" (n x n), "sensitivities" (n x n x d), "beta", "y_hat".
std::shared_ptr<const CostModel> make_toy_model(const nlohmann::json& config);

}  // namespace etk

#endif
