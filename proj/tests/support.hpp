#pragma once

#include "transvqa/core.hpp"
#include "transvqa/model_adapter.hpp"
#include "transvqa/rng.hpp"
#include "transvqa/toy_model.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace testing {

using namespace transvqa;

inline const ToyModel& toy() {
  static const ToyModel m;
  return m;
}

/// Ten-entry vocabulary (six words plus the four specials), a uniform MLM
/// head and input-independent features, hence zero gradients everywhere.
class StubModel final : public VisionLanguageModel {
 public:
  explicit StubModel(Capabilities caps = {true, true, true, true}, int image_layers = 2,
                     int image_tokens = 4, int mm_layers = 2, int mm_tokens = 6)
      : caps_(caps),
        tok_(Vocabulary({"w0", "w1", "w2", "w3", "w4", "w5"})),
        image_layers_(image_layers),
        image_tokens_(image_tokens),
        mm_layers_(mm_layers),
        mm_tokens_(mm_tokens) {}

  std::string name() const override { return "stub"; }
  Capabilities capabilities() const override { return caps_; }
  const Tokenizer& tokenizer() const override { return tok_; }
  std::size_t max_text_length() const override { return 16; }
  Shape image_shape() const override { return {4, 4, 3}; }

  LayerFeatures forward_features(const ImageTensor&, const TokenizedText& text) const override {
    LayerFeatures f;
    for (int l = 0; l < image_layers_; ++l) f.image.push_back(Eigen::MatrixXd::Ones(image_tokens_, 3));
    f.text.push_back(Eigen::MatrixXd::Ones(std::max<std::size_t>(text.size(), 1), 3));
    for (int l = 0; l < mm_layers_; ++l) f.multimodal.push_back(Eigen::MatrixXd::Ones(mm_tokens_, 3));
    return f;
  }

  LossGradients loss_and_gradients(const LossSpec& spec, const ImageTensor& image,
                                   const TokenizedText& text) const override {
    LossGradients g;
    g.image = ImageTensor(image.shape(), 0.0);
    g.word_embeddings.assign(text.size(), std::vector<double>(3, 0.0));
    if (const auto* f = std::get_if<FeatureLoss>(&spec.term)) {
      auto feats = forward_features(image, text);
      double total = 0;
      for (auto e : f->encoders) {
        for (const auto& m : feats.of(e)) total += static_cast<double>(m.rows());
      }
      g.loss = total * spec.scale;
    } else {
      const auto& ar = std::get<AntiRecoveryLoss>(spec.term);
      double total = 0;
      for (const auto& t : *ar.templates) total += std::log(0.1) * t.mask_indices.size();
      g.loss = total * spec.scale;
    }
    return g;
  }

  MlmDistribution mlm_probabilities(const TokenizedText& text,
                                    const std::vector<std::size_t>& positions,
                                    const ImageTensor&) const override {
    MlmDistribution d;
    for (auto p : positions) {
      if (p >= text.size()) throw Error("mask index out of range");
      d.positions.push_back(p);
      d.probs.push_back(std::vector<double>(tok_.vocab().size(), 1.0 / tok_.vocab().size()));
    }
    return d;
  }
  using VisionLanguageModel::mlm_probabilities;

  std::vector<double> word_embedding(const TokenizedText&, std::size_t) const override {
    return {1.0, 0.0, 0.0};
  }
  std::vector<double> contextual_embedding(const TokenizedText&, std::size_t) const override {
    return {1.0, 0.0, 0.0};
  }

 private:
  Capabilities caps_;
  Tokenizer tok_;
  int image_layers_, image_tokens_, mm_layers_, mm_tokens_;
};

/// Encodes a sentence as [1, number of words from `bad`], so a sentence
/// stays at similarity 1 with a clean (bad-free) sentence iff it contains
/// no bad word, and drops to 1/sqrt(2) with one.
class BadWordEncoder final : public SentenceEncoder {
 public:
  explicit BadWordEncoder(std::set<std::string> bad) : bad_(std::move(bad)) {}
  std::vector<double> encode(const TokenizedText& text) const override {
    double n = 0;
    for (const auto& w : text.words) n += bad_.count(w) ? 1.0 : 0.0;
    return {1.0, n};
  }

 private:
  std::set<std::string> bad_;
};

/// Fixed embedding per full sentence (words joined by spaces).
class TableEncoder final : public SentenceEncoder {
 public:
  explicit TableEncoder(std::map<std::string, std::vector<double>> table)
      : table_(std::move(table)) {}
  std::vector<double> encode(const TokenizedText& text) const override {
    std::string key;
    for (const auto& w : text.words) key += (key.empty() ? "" : " ") + w;
    return table_.at(key);
  }

 private:
  std::map<std::string, std::vector<double>> table_;
};

inline ImageTensor random_image(Shape s, std::uint64_t seed) {
  Rng rng(seed);
  ImageTensor img(s);
  for (auto& v : img.data()) v = rng.uniform();
  return img;
}

inline ImageTensor image_of(std::vector<double> values) {
  Shape s{1, values.size(), 1};
  return ImageTensor(s, std::move(values));
}

}  // namespace testing
