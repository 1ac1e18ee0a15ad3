#include "transvqa/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace transvqa {

std::string Shape::str() const {
  std::ostringstream os;
  os << height << "x" << width << "x" << channels;
  return os.str();
}

ImageTensor::ImageTensor(Shape shape, double fill) : shape_(shape), pixels_(shape.size(), fill) {}

ImageTensor::ImageTensor(Shape shape, std::vector<double> pixels)
    : shape_(shape), pixels_(std::move(pixels)) {
  if (pixels_.size() != shape_.size()) {
    throw Error("image buffer holds " + std::to_string(pixels_.size()) +
                " values, shape " + shape_.str() + " needs " + std::to_string(shape_.size()));
  }
}

bool ImageTensor::in_unit_range() const {
  return std::all_of(pixels_.begin(), pixels_.end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

namespace {

std::string collapse_lower(const std::string& s) {
  std::string out;
  bool space = false;
  for (unsigned char ch : s) {
    if (std::isspace(ch)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(ch)));
  }
  return out;
}

void require_same_shape(const ImageTensor& a, const ImageTensor& b) {
  if (a.shape() != b.shape()) {
    throw Error("image shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace

AnswerSet::AnswerSet(std::vector<std::string> answers) {
  std::vector<std::string> seen;
  for (auto& a : answers) {
    auto key = collapse_lower(a);
    if (key.empty()) continue;
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    answers_.push_back(std::move(a));
  }
  if (answers_.empty()) throw Error("answer set is empty");
}

std::string to_string(LossFlag flag) {
  switch (flag) {
    case LossFlag::kFeatureImage: return "feature_image";
    case LossFlag::kFeatureMultimodal: return "feature_multimodal";
    case LossFlag::kFeatureText: return "feature_text";
    case LossFlag::kAntiRecovery: return "anti_recovery";
  }
  return "?";
}

LossFlag parse_loss_flag(const std::string& name) {
  for (auto f : {LossFlag::kFeatureImage, LossFlag::kFeatureMultimodal, LossFlag::kFeatureText,
                 LossFlag::kAntiRecovery}) {
    if (to_string(f) == name) return f;
  }
  throw Error("unknown loss flag '" + name + "'");
}

std::string format_loss_flags(const LossFlags& flags) {
  std::string out;
  for (auto f : flags) {
    if (!out.empty()) out += ",";
    out += to_string(f);
  }
  return out;
}

LossFlags parse_loss_flags(const std::string& comma_list) {
  LossFlags flags;
  std::stringstream ss(comma_list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    auto e = item.find_last_not_of(" \t");
    flags.insert(parse_loss_flag(item.substr(b, e - b + 1)));
  }
  return flags;
}

Ablation parse_ablation(const std::string& name) {
  if (name == "IE") return Ablation::kImageEncoder;
  if (name == "LRP") return Ablation::kLatentRepresentation;
  if (name == "LLM-E") return Ablation::kLlmEnhanced;
  if (name == "full") return Ablation::kFull;
  throw Error("unknown ablation '" + name + "' (expected IE, LRP, LLM-E or full)");
}

std::string to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::kImageEncoder: return "IE";
    case Ablation::kLatentRepresentation: return "LRP";
    case Ablation::kLlmEnhanced: return "LLM-E";
    case Ablation::kFull: return "full";
  }
  return "?";
}

LossFlags flags_for(Ablation ablation) {
  switch (ablation) {
    case Ablation::kImageEncoder: return {LossFlag::kFeatureImage};
    case Ablation::kLatentRepresentation:
      return {LossFlag::kFeatureImage, LossFlag::kFeatureMultimodal};
    case Ablation::kLlmEnhanced:
      return {LossFlag::kFeatureImage, LossFlag::kFeatureMultimodal, LossFlag::kAntiRecovery};
    case Ablation::kFull:
      return {LossFlag::kFeatureImage, LossFlag::kFeatureMultimodal, LossFlag::kAntiRecovery,
              LossFlag::kFeatureText};
  }
  return {};
}

void AttackConfig::validate() const {
  if (max_iters < 1) throw Error("max_iters must be >= 1");
  if (top_k < 1) throw Error("top_k must be >= 1");
  if (!(image_budget >= 0.0 && image_budget <= 1.0)) throw Error("image_budget must lie in [0,1]");
  if (!(step_size > 0.0)) throw Error("step_size must be > 0");
  if (step_size > image_budget && image_budget > 0.0) {
    throw Error("step_size must not exceed image_budget");
  }
  if (!(text_sim_threshold >= -1.0 && text_sim_threshold <= 1.0)) {
    throw Error("text_sim_threshold must lie in [-1,1]");
  }
  if (!(diversity_prob >= 0.0 && diversity_prob <= 1.0)) {
    throw Error("diversity_prob must lie in [0,1]");
  }
}

double linf_distance(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b);
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::abs(a[i] - b[i]));
  return best;
}

ImageTensor clip_to_budget(const ImageTensor& adv, const ImageTensor& clean, double budget) {
  require_same_shape(adv, clean);
  if (budget < 0.0) throw Error("negative image budget");
  ImageTensor out = adv;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = std::clamp(adv[i], clean[i] - budget, clean[i] + budget);
    out[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

bool within_budget(const ImageTensor& adv, const ImageTensor& clean, double budget) {
  require_same_shape(adv, clean);
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < adv.size(); ++i) {
    if (adv[i] < std::nextafter(clean[i] - budget, -inf)) return false;
    if (adv[i] > std::nextafter(clean[i] + budget, inf)) return false;
  }
  return true;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw Error("cosine of vectors with dimensions " + std::to_string(a.size()) + " and " +
                std::to_string(b.size()));
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error("cosine similarity undefined for a zero-norm vector");
  // sqrt(x * x) == |x| in IEEE arithmetic, so identical inputs give exactly 1.
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

double semantic_similarity(const TokenizedText& adv, const TokenizedText& clean,
                           const SentenceEncoder& encoder) {
  return cosine_similarity(encoder.encode(adv), encoder.encode(clean));
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace transvqa
