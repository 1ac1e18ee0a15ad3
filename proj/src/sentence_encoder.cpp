#include "transvqa/sentence_encoder.hpp"

#include "transvqa/rng.hpp"
#include "transvqa/tokenizer.hpp"

namespace transvqa {

LexiconSentenceEncoder::LexiconSentenceEncoder(const ToyLexicon& lexicon, std::uint64_t seed,
                                               double word_noise)
    : lexicon_(lexicon), seed_(seed), noise_(word_noise) {}

std::vector<double> LexiconSentenceEncoder::word_vector(const std::string& word) const {
  std::vector<double> v(kDim, 0.0);
  Rng noise(mix_seed(seed_, fnv1a(word.data(), word.size())));
  int cluster = lexicon_.cluster_of(word);
  if (cluster < 0) {
    for (auto& x : v) x = noise.normal();
    return v;
  }
  Rng centre(mix_seed(seed_ ^ 0x5bd1e995ULL, static_cast<std::uint64_t>(cluster)));
  for (auto& x : v) x = centre.normal() + noise_ * noise.normal();
  return v;
}

std::vector<double> LexiconSentenceEncoder::encode(const TokenizedText& text) const {
  std::vector<double> sum(kDim, 0.0);
  double total = 0.0;
  for (const auto& w : text.words) {
    if (!is_alphabetic_word(w)) continue;
    double weight = is_stop_word(w) ? 0.25 : 1.0;
    auto v = word_vector(w);
    for (int i = 0; i < kDim; ++i) sum[i] += weight * v[i];
    total += weight;
  }
  if (total > 0.0) {
    for (auto& x : sum) x /= total;
  }
  return sum;
}

}  // namespace transvqa
