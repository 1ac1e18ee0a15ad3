#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace transvqa {

/// Raised for violated preconditions: shape mismatches, malformed inputs,
/// missing adapter capabilities.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const { return height * width * channels; }
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// H x W x C pixels in [0,1], row-major with channels innermost.
class ImageTensor {
 public:
  ImageTensor() = default;
  explicit ImageTensor(Shape shape, double fill = 0.0);
  ImageTensor(Shape shape, std::vector<double> pixels);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels_[(y * shape_.width + x) * shape_.channels + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels_[(y * shape_.width + x) * shape_.channels + c];
  }
  double& operator[](std::size_t i) { return pixels_[i]; }
  double operator[](std::size_t i) const { return pixels_[i]; }

  const std::vector<double>& data() const { return pixels_; }
  std::vector<double>& data() { return pixels_; }

  /// True when every element lies in [0,1].
  bool in_unit_range() const;

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  Shape shape_;
  std::vector<double> pixels_;
};

struct TokenizedText {
  std::vector<std::string> words;
  std::vector<int> token_ids;
  /// Positions of informative (non-stop-word) tokens, ascending.
  std::vector<std::size_t> informative;

  std::size_t size() const { return words.size(); }
  bool operator==(const TokenizedText&) const = default;
};

/// Non-empty set of correct answers, distinct after normalization.
class AnswerSet {
 public:
  AnswerSet() = default;
  explicit AnswerSet(std::vector<std::string> answers);

  const std::vector<std::string>& answers() const { return answers_; }
  std::size_t size() const { return answers_.size(); }
  bool operator==(const AnswerSet&) const = default;

 private:
  std::vector<std::string> answers_;
};

enum class LossFlag { kFeatureImage, kFeatureMultimodal, kFeatureText, kAntiRecovery };

std::string to_string(LossFlag flag);
LossFlag parse_loss_flag(const std::string& name);

using LossFlags = std::set<LossFlag>;

std::string format_loss_flags(const LossFlags& flags);
LossFlags parse_loss_flags(const std::string& comma_list);

/// Named ablation presets. "full" enables every loss and the joint attack.
enum class Ablation { kImageEncoder, kLatentRepresentation, kLlmEnhanced, kFull };

Ablation parse_ablation(const std::string& name);
std::string to_string(Ablation ablation);
LossFlags flags_for(Ablation ablation);

enum class StepDirection { kMinimize, kMaximize };

enum class InitNoise {
  /// delta ~ U(-budget, budget), then clipped.
  kSymmetricBudget,
  /// delta ~ U(0, 1), then clipped.
  kUnitUniform,
};

struct AttackConfig {
  int max_iters = 20;
  double step_size = 2.0 / 255.0;
  double image_budget = 16.0 / 255.0;
  double text_sim_threshold = 0.95;
  int top_k = 8;
  std::uint64_t seed = 0;
  LossFlags loss_flags = flags_for(Ablation::kFull);
  double diversity_prob = 0.5;
  StepDirection direction = StepDirection::kMinimize;
  InitNoise init_noise = InitNoise::kSymmetricBudget;

  std::string llm_endpoint;
  std::string llm_model = "gpt-4";
  std::string llm_api_key_env = "OPENAI_API_KEY";
  std::string prompt_template_path;

  bool has(LossFlag flag) const { return loss_flags.count(flag) != 0; }

  /// Throws Error when an invariant is violated.
  void validate() const;
};

struct Substitution {
  std::size_t position = 0;
  std::string old_word;
  std::string new_word;
  bool operator==(const Substitution&) const = default;
};

struct IterationRecord {
  int iter = 0;
  std::optional<double> loss_feature;
  std::optional<double> loss_anti_recovery;
  std::optional<double> loss_cross;
  bool joint_triggered = false;
  bool joint_ran = false;
  std::vector<Substitution> substitutions;
  /// linf after each image update performed this iteration, in order.
  std::vector<double> linf_after_step;
  std::vector<std::string> notes;
};

struct AttackTrace {
  std::vector<IterationRecord> records;
  std::vector<std::string> notes;
};

struct AttackResult {
  ImageTensor adv_image;
  TokenizedText adv_text;
  AttackTrace trace;
  double linf = 0.0;
  double semantic_sim = 1.0;
  int n_substitutions = 0;
};

/// max |a - b| over all elements.
double linf_distance(const ImageTensor& a, const ImageTensor& b);

/// Clamp into [clean - budget, clean + budget], then into [0,1].
ImageTensor clip_to_budget(const ImageTensor& adv, const ImageTensor& clean, double budget);

/// Budget check with a one-ulp allowance per element.
bool within_budget(const ImageTensor& adv, const ImageTensor& clean, double budget);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

class SentenceEncoder {
 public:
  virtual ~SentenceEncoder() = default;
  virtual std::vector<double> encode(const TokenizedText& text) const = 0;
};

/// Cosine of the two sentence embeddings. Throws on a zero-norm embedding.
double semantic_similarity(const TokenizedText& adv, const TokenizedText& clean,
                           const SentenceEncoder& encoder);

double round6(double v);

}  // namespace transvqa
