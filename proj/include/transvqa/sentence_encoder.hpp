#pragma once

#include "transvqa/core.hpp"
#include "transvqa/toy_model.hpp"

#include <cstdint>

namespace transvqa {

/// Toy stand-in for a universal sentence encoder: weighted mean of
/// per-word vectors, where words of one synonym cluster share a centre.
/// Stop words get a quarter weight and punctuation none.
class LexiconSentenceEncoder final : public SentenceEncoder {
 public:
  static constexpr int kDim = 32;

  explicit LexiconSentenceEncoder(const ToyLexicon& lexicon = ToyLexicon::instance(),
                                  std::uint64_t seed = 7, double word_noise = 0.2);

  std::vector<double> encode(const TokenizedText& text) const override;
  std::vector<double> word_vector(const std::string& word) const;

 private:
  const ToyLexicon& lexicon_;
  std::uint64_t seed_;
  double noise_;
};

}  // namespace transvqa
