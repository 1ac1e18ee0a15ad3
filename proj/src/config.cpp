#include "transvqa/config.hpp"

#include "transvqa/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace transvqa {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) throw Error("config key '" + key + "': cannot parse '" + value + "'");
  return out;
}

/// Accepts plain reals and "a/b" fractions such as 16/255.
double parse_real(const std::string& key, const std::string& value) {
  auto slash = value.find('/');
  if (slash == std::string::npos) return parse_number<double>(key, trim(value));
  double num = parse_number<double>(key, trim(value.substr(0, slash)));
  double den = parse_number<double>(key, trim(value.substr(slash + 1)));
  if (den == 0.0) throw Error("config key '" + key + "': division by zero");
  return num / den;
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "max_iters",      "step_size",   "image_budget", "text_sim_threshold",
      "top_k",          "seed",        "loss_flags",   "diversity_prob",
      "direction",      "init_noise",  "llm_endpoint", "llm_model",
      "llm_api_key_env", "prompt_template_path",
  };
  return keys;
}

void set_config_value(AttackConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "max_iters") {
    c.max_iters = parse_number<int>(key, value);
  } else if (key == "step_size") {
    c.step_size = parse_real(key, value);
  } else if (key == "image_budget") {
    c.image_budget = parse_real(key, value);
  } else if (key == "text_sim_threshold") {
    c.text_sim_threshold = parse_real(key, value);
  } else if (key == "top_k") {
    c.top_k = parse_number<int>(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "loss_flags") {
    c.loss_flags = parse_loss_flags(value);
  } else if (key == "diversity_prob") {
    c.diversity_prob = parse_real(key, value);
  } else if (key == "direction") {
    if (value == "minimize") {
      c.direction = StepDirection::kMinimize;
    } else if (value == "maximize") {
      c.direction = StepDirection::kMaximize;
    } else {
      throw Error("config key 'direction' must be minimize or maximize, got '" + value + "'");
    }
  } else if (key == "init_noise") {
    if (value == "budget") {
      c.init_noise = InitNoise::kSymmetricBudget;
    } else if (value == "unit") {
      c.init_noise = InitNoise::kUnitUniform;
    } else {
      throw Error("config key 'init_noise' must be budget or unit, got '" + value + "'");
    }
  } else if (key == "llm_endpoint") {
    c.llm_endpoint = value;
  } else if (key == "llm_model") {
    c.llm_model = value;
  } else if (key == "llm_api_key_env") {
    c.llm_api_key_env = value;
  } else if (key == "prompt_template_path") {
    c.prompt_template_path = value;
  } else {
    throw Error("unknown config key '" + key + "'");
  }
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    }
    auto key = trim(line.substr(0, eq));
    if (std::find(config_keys().begin(), config_keys().end(), key) == config_keys().end()) {
      throw Error("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

AttackConfig resolve_config(const std::optional<std::string>& file, const EnvLookup& env,
                            const std::map<std::string, std::string>& flags) {
  AttackConfig c;
  if (file) {
    for (const auto& [k, v] : read_config_file(*file)) set_config_value(c, k, v);
  }
  if (env) {
    for (const auto& key : config_keys()) {
      std::string name = "TRANSVQA_" + key;
      std::transform(name.begin(), name.end(), name.begin(), ::toupper);
      if (auto v = env(name)) set_config_value(c, key, *v);
    }
  }
  for (const auto& [k, v] : flags) set_config_value(c, k, v);
  c.validate();
  return c;
}

std::string canonical_config(const AttackConfig& c) {
  std::ostringstream out;
  out << "max_iters=" << c.max_iters << "\n"
      << "step_size=" << fmt_real(c.step_size) << "\n"
      << "image_budget=" << fmt_real(c.image_budget) << "\n"
      << "text_sim_threshold=" << fmt_real(c.text_sim_threshold) << "\n"
      << "top_k=" << c.top_k << "\n"
      << "seed=" << c.seed << "\n"
      << "loss_flags=" << format_loss_flags(c.loss_flags) << "\n"
      << "diversity_prob=" << fmt_real(c.diversity_prob) << "\n"
      << "direction=" << (c.direction == StepDirection::kMinimize ? "minimize" : "maximize") << "\n"
      << "init_noise=" << (c.init_noise == InitNoise::kSymmetricBudget ? "budget" : "unit") << "\n"
      << "llm_endpoint=" << c.llm_endpoint << "\n"
      << "llm_model=" << c.llm_model << "\n"
      << "llm_api_key_env=" << c.llm_api_key_env << "\n"
      << "prompt_template_path=" << c.prompt_template_path << "\n";
  return out.str();
}

std::string config_hash(const AttackConfig& c) {
  auto text = canonical_config(c);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(text.data(), text.size())));
  return buf;
}

}  // namespace transvqa
