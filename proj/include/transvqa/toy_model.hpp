#pragma once

// Deterministic toy vision-language model used for desk-scale verification:
//   image encoder      2 layers over 4x4 patches of a 16x16x3 image
//   text encoder       1 context-mixing layer over word embeddings
//   multimodal encoder 2 single-head self-attention layers over
//                      [CLS] + image tokens + text tokens
//   MLM head           linear + softmax over the text positions
// As a victim it answers by filling the masked slot of
// "the answer to the question '<q>' is [MASK]" with the most probable word
// of its answer vocabulary.

#include "transvqa/model_adapter.hpp"
#include "transvqa/tensor_archive.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace transvqa {

/// Word list of the toy vocabulary, grouped into synonym clusters. The
/// clusters shape both the toy word embeddings and the toy sentence encoder.
struct ToyLexicon {
  struct Entry {
    std::string word;
    int cluster;  // -1 for function words and punctuation
  };
  std::vector<Entry> entries;
  std::vector<std::string> answers;

  static const ToyLexicon& instance();
  int cluster_of(const std::string& word) const;  // -1 when unknown or unclustered
};

class ToyModel final : public VisionLanguageModel, public VqaVictim {
 public:
  static constexpr std::uint64_t kDefaultSeed = 20240917;
  static constexpr int kDim = 24;
  static constexpr int kImageSize = 16;
  static constexpr int kChannels = 3;
  static constexpr int kPatch = 4;
  static constexpr int kMaxText = 40;

  explicit ToyModel(std::uint64_t seed = kDefaultSeed, std::string name = "toy");

  static ToyModel from_archive(const TensorArchive& archive, std::string name = "toy");
  TensorArchive to_archive() const;

  std::string name() const override { return name_; }
  Capabilities capabilities() const override;
  const Tokenizer& tokenizer() const override { return tokenizer_; }
  std::size_t max_text_length() const override { return kMaxText; }
  Shape image_shape() const override;

  LayerFeatures forward_features(const ImageTensor& image,
                                 const TokenizedText& text) const override;
  LossGradients loss_and_gradients(const LossSpec& loss, const ImageTensor& image,
                                   const TokenizedText& text) const override;
  double loss_value(const LossSpec& loss, const ImageTensor& image,
                    const TokenizedText& text) const override;
  MlmDistribution mlm_probabilities(const TokenizedText& masked_text,
                                    const std::vector<std::size_t>& positions,
                                    const ImageTensor& image) const override;
  using VisionLanguageModel::mlm_probabilities;
  std::vector<double> word_embedding(const TokenizedText& text,
                                     std::size_t position) const override;
  std::vector<double> contextual_embedding(const TokenizedText& text,
                                           std::size_t position) const override;

  /// Loss evaluated with explicit word-embedding inputs (rows = positions)
  /// in place of the vocabulary lookup. Finite-difference oracles use this.
  double loss_at_embeddings(const LossSpec& loss, const ImageTensor& image,
                            const TokenizedText& text, const Eigen::MatrixXd& embeddings) const;

  // Victim side.
  std::string predict(const ImageTensor& image, const std::string& question) const override;
  /// Log-probabilities of each answer word at the prompt's masked slot.
  std::vector<double> answer_logits(const ImageTensor& image, const std::string& question) const;
  TokenizedText answer_prompt(const std::string& question) const;
  const std::vector<std::string>& answer_vocabulary() const { return answers_; }

  /// Uniform random image of the toy shape.
  static ImageTensor random_image(std::uint64_t seed);

 private:
  struct Weights;
  struct Graph;

  ToyModel(std::shared_ptr<const Weights> weights, std::string name);

  void check_inputs(const ImageTensor& image, const TokenizedText& text) const;
  Eigen::MatrixXd patches(const ImageTensor& image) const;
  ImageTensor unpatch(const Eigen::MatrixXd& grad, const Shape& shape) const;
  Eigen::MatrixXd lookup(const TokenizedText& text) const;

  std::string name_;
  std::shared_ptr<const Weights> w_;
  Tokenizer tokenizer_;
  std::vector<std::string> answers_;
};

}  // namespace transvqa
