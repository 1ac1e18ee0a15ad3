#pragma once

#include "transvqa/core.hpp"
#include "transvqa/model_adapter.hpp"

#include <map>
#include <string>
#include <vector>

namespace transvqa {

struct Candidate {
  std::string word;
  int token_id = -1;
  double mlm_prob = 0.0;
  /// Context-aware embedding; filled per trigger by embed_candidates.
  std::vector<double> embedding;
};

struct PositionCandidates {
  std::size_t position = 0;
  std::string original;
  std::vector<Candidate> candidates;
};

/// Candidates per informative position, built once from the clean question.
struct CandidateSet {
  std::vector<PositionCandidates> positions;

  std::size_t total() const;
  const PositionCandidates* find(std::size_t position) const;
};

/// Top-k MLM predictions at each informative position (masked in turn),
/// skipping special tokens, punctuation and other non-alphabetic entries,
/// stop words and the original word.
CandidateSet build_candidates(const TokenizedText& clean, int top_k,
                              const VisionLanguageModel& model, const ImageTensor& image);

/// Estimated post-attack word representation: embedding + gradient.
std::vector<double> estimate_target_embedding(const std::vector<double>& embedding,
                                              const std::vector<double>& gradient);

/// Fills each candidate's embedding with the model's contextual embedding
/// at its position after substituting it into `context`.
CandidateSet embed_candidates(const CandidateSet& candidates, const TokenizedText& context,
                              const VisionLanguageModel& model);

struct RankedCandidate {
  std::size_t position = 0;
  std::size_t index = 0;  // into PositionCandidates::candidates
  double gamma = 0.0;
  bool operator==(const RankedCandidate&) const = default;
};

struct Ranking {
  std::vector<RankedCandidate> order;
  std::vector<std::string> warnings;
};

/// Global descending order of cos(target_i, candidate_ij) over every
/// candidate of every position that has a target. Ties go to the lower
/// position, then the lower candidate index. Zero-norm embeddings are
/// dropped with a warning.
Ranking rank_synonyms(const std::map<std::size_t, std::vector<double>>& targets,
                      const CandidateSet& candidates);

struct SubstitutionOutcome {
  TokenizedText text;
  std::vector<Substitution> substitutions;
  /// Similarity of `text` to the clean question.
  double similarity = 1.0;
  int checked = 0;
};

/// Greedy walk down the ranking: each entry whose position is not yet
/// replaced is tried in the running text and kept iff the result stays
/// strictly above `threshold` in similarity to `clean`. A kept candidate
/// retires its position. Stops when every ranked position is replaced or
/// the ranking is exhausted.
SubstitutionOutcome substitute_with_constraint(const TokenizedText& current,
                                               const TokenizedText& clean,
                                               const CandidateSet& candidates,
                                               const std::vector<RankedCandidate>& ranking,
                                               double threshold, const SentenceEncoder& encoder,
                                               const Tokenizer& tokenizer);

}  // namespace transvqa
