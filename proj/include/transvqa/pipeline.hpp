#pragma once

// Batch driver shared by the command-line tool, the Python module and the
// acceptance suite: attack every sample of a dataset, write the artefacts,
// and replay stored pairs against a victim.
//
// Run directory layout:
//   run.json            model, victim, llm mode, dataset, config, attacked ids
//   report.jsonl        EvalRecords against the victim, then the summary
//   adv/<id>.png        adversarial image, 8-bit
//   adv/<id>.tensor     adversarial image, float64 sidecar
//   adv/<id>.json       adversarial question, candidates, schedule, trace
//   eval_<victim>.jsonl written by evaluate_run

#include "transvqa/evalkit.hpp"
#include "transvqa/llm_bridge.hpp"
#include "transvqa/orchestrator.hpp"
#include "transvqa/registry.hpp"

#include "json.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace transvqa {

struct PipelineOptions {
  AttackConfig config;
  std::string model = "toy";
  /// Empty means "same as model".
  std::string victim;
  /// "offline" or "endpoint".
  std::string llm = "offline";
  int jobs = 1;
};

/// Per-sample seed: the run seed mixed with a hash of the sample id.
std::uint64_t sample_seed(std::uint64_t run_seed, const std::string& id);

/// File-system safe form of a sample id.
std::string artifact_stem(const std::string& id);

std::unique_ptr<LlmClient> make_llm_client(const std::string& mode, const AttackConfig& config);

struct SampleRun {
  Sample sample;
  std::uint64_t seed = 0;
  ImageTensor clean_image;
  TokenizedText clean_text;
  std::optional<AttackResult> result;
  AttackDetails details;
  std::optional<EvalRecord> record;
  std::string error;
};

struct AttackRunOutput {
  std::vector<SampleRun> runs;
  Report report;
  std::vector<std::string> errors;
};

/// Attacks every sample. When `out_dir` is non-empty the run directory is
/// populated. Per-sample failures are collected, not thrown.
AttackRunOutput attack_dataset(const Dataset& dataset, const PipelineOptions& options,
                               const std::string& out_dir = "");

EvalRecord evaluate_pair(const VqaVictim& victim, const std::string& id,
                         const ImageTensor& clean_image, const std::string& question,
                         const ImageTensor& adv_image, const std::string& adv_question,
                         const AnswerSet& answers);

/// Replays the stored pairs of `run_dir` against `victim`, writes
/// eval_<victim>.jsonl there and returns the report. Stored artefacts are
/// only read.
Report evaluate_run(const std::string& run_dir, const std::string& victim, int jobs = 1);

/// Sidecar metadata written to adv/<id>.json.
nlohmann::json sample_metadata(const SampleRun& run, const AttackConfig& config,
                               const Tokenizer& tokenizer);

/// Human-readable candidates, trigger schedule and trace.
std::string describe_sample(const nlohmann::json& metadata);

}  // namespace transvqa
