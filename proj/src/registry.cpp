#include "transvqa/registry.hpp"

#include "transvqa/toy_model.hpp"

#include <mutex>

namespace transvqa {

namespace {

constexpr std::uint64_t kAltSeed = 977;

ModelHandle toy_handle(std::uint64_t seed, const std::string& name) {
  auto m = std::make_shared<const ToyModel>(seed, name);
  return ModelHandle{m, m};
}

std::mutex& registry_mutex() {
  static std::mutex mu;
  return mu;
}

}  // namespace

ModelRegistry& ModelRegistry::global() {
  static ModelRegistry reg = [] {
    ModelRegistry r;
    r.add("toy", [] {
      static const ModelHandle h = toy_handle(ToyModel::kDefaultSeed, "toy");
      return h;
    });
    r.add("toy-alt", [] {
      static const ModelHandle h = toy_handle(kAltSeed, "toy-alt");
      return h;
    });
    return r;
  }();
  return reg;
}

void ModelRegistry::add(const std::string& name, ModelFactory factory) {
  std::lock_guard lock(registry_mutex());
  for (auto& e : entries_) {
    if (e.first == name) {
      e.second = std::move(factory);
      return;
    }
  }
  entries_.emplace_back(name, std::move(factory));
}

bool ModelRegistry::contains(const std::string& name) const {
  std::lock_guard lock(registry_mutex());
  for (const auto& e : entries_) {
    if (e.first == name) return true;
  }
  return false;
}

std::vector<std::string> ModelRegistry::names() const {
  std::lock_guard lock(registry_mutex());
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

ModelHandle ModelRegistry::make(const std::string& name) const {
  ModelFactory f;
  {
    std::lock_guard lock(registry_mutex());
    for (const auto& e : entries_) {
      if (e.first == name) f = e.second;
    }
  }
  if (!f) {
    std::string known;
    for (const auto& n : names()) known += (known.empty() ? "" : ", ") + n;
    throw Error("unknown model '" + name + "'; registered: " + known);
  }
  return f();
}

}  // namespace transvqa
