#include "transvqa/text_attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace transvqa {

std::size_t CandidateSet::total() const {
  std::size_t n = 0;
  for (const auto& p : positions) n += p.candidates.size();
  return n;
}

const PositionCandidates* CandidateSet::find(std::size_t position) const {
  for (const auto& p : positions) {
    if (p.position == position) return &p;
  }
  return nullptr;
}

CandidateSet build_candidates(const TokenizedText& clean, int top_k,
                              const VisionLanguageModel& model, const ImageTensor& image) {
  if (top_k < 1) throw Error("top_k must be >= 1");
  if (!model.capabilities().mlm_head) {
    throw Error("model '" + model.name() + "' has no MLM head to generate candidates");
  }
  CandidateSet set;
  if (clean.informative.empty()) return set;
  const auto& vocab = model.tokenizer().vocab();
  for (auto pos : clean.informative) {
    if (pos >= clean.size()) throw Error("informative position out of range");
    TokenizedText masked = clean;
    masked.words[pos] = std::string(Vocabulary::kMask);
    masked.token_ids[pos] = vocab.mask_id();
    auto dist = model.mlm_probabilities(masked, {pos}, image);
    const auto& probs = dist.probs.front();
    std::vector<int> ids(probs.size());
    std::iota(ids.begin(), ids.end(), 0);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) { return probs[a] > probs[b]; });
    PositionCandidates pc;
    pc.position = pos;
    pc.original = clean.words[pos];
    for (int id : ids) {
      if (static_cast<int>(pc.candidates.size()) >= top_k) break;
      if (vocab.is_special(id)) continue;
      const auto& w = vocab.word(id);
      if (!is_alphabetic_word(w) || is_stop_word(w) || w == pc.original) continue;
      pc.candidates.push_back(Candidate{w, id, probs[id], {}});
    }
    set.positions.push_back(std::move(pc));
  }
  return set;
}

std::vector<double> estimate_target_embedding(const std::vector<double>& embedding,
                                              const std::vector<double>& gradient) {
  if (embedding.size() != gradient.size()) {
    throw Error("embedding has dimension " + std::to_string(embedding.size()) +
                " but gradient has " + std::to_string(gradient.size()));
  }
  std::vector<double> out(embedding.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = embedding[i] + gradient[i];
  return out;
}

CandidateSet embed_candidates(const CandidateSet& candidates, const TokenizedText& context,
                              const VisionLanguageModel& model) {
  CandidateSet out = candidates;
  const auto& tok = model.tokenizer();
  for (auto& pc : out.positions) {
    for (auto& c : pc.candidates) {
      auto text = tok.with_word(context, pc.position, c.word);
      c.embedding = model.contextual_embedding(text, pc.position);
    }
  }
  return out;
}

Ranking rank_synonyms(const std::map<std::size_t, std::vector<double>>& targets,
                      const CandidateSet& candidates) {
  Ranking r;
  for (const auto& pc : candidates.positions) {
    auto t = targets.find(pc.position);
    if (t == targets.end()) continue;
    for (std::size_t j = 0; j < pc.candidates.size(); ++j) {
      const auto& e = pc.candidates[j].embedding;
      if (e.size() != t->second.size()) {
        throw Error("candidate embedding dimension does not match its target");
      }
      double nt = 0, ne = 0, dot = 0;
      for (std::size_t k = 0; k < e.size(); ++k) {
        nt += t->second[k] * t->second[k];
        ne += e[k] * e[k];
        dot += t->second[k] * e[k];
      }
      if (nt == 0.0 || ne == 0.0) {
        r.warnings.push_back("candidate '" + pc.candidates[j].word + "' at position " +
                             std::to_string(pc.position) + " dropped: zero-norm embedding");
        continue;
      }
      r.order.push_back({pc.position, j, dot / std::sqrt(nt * ne)});
    }
  }
  std::sort(r.order.begin(), r.order.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.gamma != b.gamma) return a.gamma > b.gamma;
    if (a.position != b.position) return a.position < b.position;
    return a.index < b.index;
  });
  return r;
}

SubstitutionOutcome substitute_with_constraint(const TokenizedText& current,
                                               const TokenizedText& clean,
                                               const CandidateSet& candidates,
                                               const std::vector<RankedCandidate>& ranking,
                                               double threshold, const SentenceEncoder& encoder,
                                               const Tokenizer& tokenizer) {
  SubstitutionOutcome out;
  out.text = current;
  std::set<std::size_t> pending;
  for (const auto& rc : ranking) pending.insert(rc.position);
  for (const auto& rc : ranking) {
    if (pending.empty()) break;
    if (!pending.count(rc.position)) continue;
    const auto* pc = candidates.find(rc.position);
    if (!pc || rc.index >= pc->candidates.size()) throw Error("ranking refers to a missing candidate");
    const auto& cand = pc->candidates[rc.index];
    if (out.text.words[rc.position] == cand.word) continue;
    auto trial = tokenizer.with_word(out.text, rc.position, cand.word);
    ++out.checked;
    if (semantic_similarity(trial, clean, encoder) > threshold) {
      out.substitutions.push_back({rc.position, out.text.words[rc.position], cand.word});
      out.text = std::move(trial);
      pending.erase(rc.position);
    }
  }
  out.similarity = semantic_similarity(out.text, clean, encoder);
  return out;
}

}  // namespace transvqa
