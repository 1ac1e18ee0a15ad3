#pragma once

#include "transvqa/model_adapter.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace transvqa {

/// A registered model may serve as attack source, victim, or both.
struct ModelHandle {
  std::shared_ptr<const VisionLanguageModel> source;  // null if not attackable
  std::shared_ptr<const VqaVictim> victim;            // null if it cannot answer
};

using ModelFactory = std::function<ModelHandle()>;

/// Name -> factory. Built-ins: "toy" and "toy-alt" (same architecture,
/// independently seeded weights). Other adapters and baseline harnesses
/// register here.
class ModelRegistry {
 public:
  static ModelRegistry& global();

  void add(const std::string& name, ModelFactory factory);
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;
  /// Throws Error listing the registered names when `name` is unknown.
  ModelHandle make(const std::string& name) const;

 private:
  std::vector<std::pair<std::string, ModelFactory>> entries_;
};

}  // namespace transvqa
