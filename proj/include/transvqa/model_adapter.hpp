#pragma once

// Source-model abstraction: per-layer features of the image, text and
// multimodal encoders, the MLM head, word embeddings and gradients of the
// attack losses with respect to pixels and word-embedding inputs.

#include "transvqa/core.hpp"
#include "transvqa/tokenizer.hpp"

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace transvqa {

enum class Encoder { kImage, kText, kMultimodal };

std::string to_string(Encoder encoder);

/// One (tokens x dim) matrix per layer, for each encoder family.
struct LayerFeatures {
  std::vector<Eigen::MatrixXd> image;
  std::vector<Eigen::MatrixXd> text;
  std::vector<Eigen::MatrixXd> multimodal;

  const std::vector<Eigen::MatrixXd>& of(Encoder encoder) const;
  bool all_finite() const;
};

/// One probability row per masked position, in the order the positions were
/// requested.
struct MlmDistribution {
  std::vector<std::size_t> positions;
  std::vector<std::vector<double>> probs;
};

/// Declarative sentence with the answer tokens masked out.
struct MaskedTemplate {
  std::string answer;
  std::string sentence;
  /// Tokenized sentence with [MASK] at every index in mask_indices.
  TokenizedText text;
  std::vector<std::size_t> mask_indices;
  std::map<std::size_t, int> target_ids;
  std::map<std::size_t, std::string> target_words;
};

struct Capabilities {
  bool differentiable = false;
  bool mlm_head = false;
  bool contextual_embeddings = false;
  bool concurrent_inference = false;
};

/// Sum over the selected encoders, layers and tokens of
/// cos(clean feature, adversarial feature).
struct FeatureLoss {
  const LayerFeatures* clean = nullptr;
  std::set<Encoder> encoders;
};

/// Sum over templates and masked positions of log p(correct token).
struct AntiRecoveryLoss {
  const std::vector<MaskedTemplate>* templates = nullptr;
};

struct LossSpec {
  std::variant<FeatureLoss, AntiRecoveryLoss> term;
  double scale = 1.0;

  static LossSpec feature(const LayerFeatures& clean, std::set<Encoder> encoders,
                          double scale = 1.0) {
    return LossSpec{FeatureLoss{&clean, std::move(encoders)}, scale};
  }
  static LossSpec anti_recovery(const std::vector<MaskedTemplate>& templates, double scale = 1.0) {
    return LossSpec{AntiRecoveryLoss{&templates}, scale};
  }
};

struct LossGradients {
  double loss = 0.0;
  /// d loss / d pixel, same shape as the input image.
  ImageTensor image;
  /// d loss / d word-embedding input, one vector per text position. Empty
  /// for losses that do not read the question text.
  std::vector<std::vector<double>> word_embeddings;
  /// Token pairs skipped because a feature vector had zero norm.
  int degenerate_terms = 0;
};

class VisionLanguageModel {
 public:
  virtual ~VisionLanguageModel() = default;

  virtual std::string name() const = 0;
  virtual Capabilities capabilities() const = 0;
  virtual const Tokenizer& tokenizer() const = 0;
  virtual std::size_t max_text_length() const = 0;
  virtual Shape image_shape() const = 0;

  virtual LayerFeatures forward_features(const ImageTensor& image,
                                         const TokenizedText& text) const = 0;

  virtual LossGradients loss_and_gradients(const LossSpec& loss, const ImageTensor& image,
                                           const TokenizedText& text) const = 0;

  virtual double loss_value(const LossSpec& loss, const ImageTensor& image,
                            const TokenizedText& text) const {
    return loss_and_gradients(loss, image, text).loss;
  }

  /// MLM distribution at `positions` of `masked_text` (which should carry
  /// [MASK] tokens there), conditioned on the image.
  virtual MlmDistribution mlm_probabilities(const TokenizedText& masked_text,
                                            const std::vector<std::size_t>& positions,
                                            const ImageTensor& image) const = 0;

  /// Input word embedding of the token at `position`.
  virtual std::vector<double> word_embedding(const TokenizedText& text,
                                             std::size_t position) const = 0;

  /// First text-encoder layer output at `position`.
  virtual std::vector<double> contextual_embedding(const TokenizedText& text,
                                                   std::size_t position) const = 0;

  MlmDistribution mlm_probabilities(const MaskedTemplate& masked, const ImageTensor& image) const;
  ImageTensor gradient_wrt_image(const LossSpec& loss, const ImageTensor& image,
                                 const TokenizedText& text) const;
  std::vector<std::vector<double>> gradient_wrt_word_embeddings(const LossSpec& loss,
                                                                const ImageTensor& image,
                                                                const TokenizedText& text) const;
};

/// Black-box VQA victim: only the predicted answer string is visible.
class VqaVictim {
 public:
  virtual ~VqaVictim() = default;
  virtual std::string name() const = 0;
  virtual std::string predict(const ImageTensor& image, const std::string& question) const = 0;
};

}  // namespace transvqa
