#pragma once

#include "transvqa/core.hpp"
#include "transvqa/llm_bridge.hpp"
#include "transvqa/model_adapter.hpp"
#include "transvqa/rng.hpp"
#include "transvqa/text_attack.hpp"

#include <functional>
#include <string>
#include <vector>

namespace transvqa {

/// Stride floor(M / (w_count + 1)); 0 means "every iteration".
int trigger_stride(int max_iters, std::size_t w_count);

/// m mod floor(M / (|W| + 1)) == 0, or always when the stride is 0.
bool should_trigger_joint(int m, int max_iters, std::size_t w_count);

std::vector<int> trigger_schedule(int max_iters, std::size_t w_count);

struct InitialState {
  ImageTensor image;
  TokenizedText text;
  CandidateSet candidates;
};

/// Random start inside the budget, unchanged text, candidates from the
/// clean pair. Candidates are skipped (empty) when the model has no MLM head.
InitialState initialize(const ImageTensor& clean_image, const TokenizedText& clean_text,
                        const AttackConfig& config, Rng& rng, const VisionLanguageModel& model);

/// Thrown when a loss or gradient turns non-finite mid-run.
class AttackAborted : public Error {
 public:
  AttackAborted(const std::string& what, AttackTrace trace)
      : Error(what), trace_(std::move(trace)) {}
  const AttackTrace& trace() const { return trace_; }

 private:
  AttackTrace trace_;
};

struct AttackEnvironment {
  const VisionLanguageModel& model;
  const SentenceEncoder& encoder;
  LlmClient& client;
  std::string prompt_template = default_prompt_template();
};

/// Extra artefacts of a run, for inspection.
struct AttackDetails {
  ImageTensor initial_image;
  CandidateSet candidates;
  std::vector<MaskedTemplate> last_templates;
  /// Called with (iteration, image) after every image update.
  std::function<void(int, const ImageTensor&)> on_image_update;
};

/// Runs exactly config.max_iters iterations of: feature-loss image step,
/// anti-recovery image step and, on trigger iterations, the cross-modal
/// image step followed by synonym substitution.
AttackResult run_attack(const ImageTensor& clean_image, const TokenizedText& clean_text,
                        const AnswerSet& answers, const AttackEnvironment& env,
                        const AttackConfig& config, AttackDetails* details = nullptr);

}  // namespace transvqa
