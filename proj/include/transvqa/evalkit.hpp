#pragma once

#include "transvqa/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace transvqa {

/// Lowercase, punctuation and the articles a/an/the removed, whitespace
/// collapsed and trimmed.
std::string normalize_answer(const std::string& answer);

bool is_correct(const std::string& prediction, const AnswerSet& answers);

struct Sample {
  std::string id;
  /// As written in the dataset: relative to the dataset file's directory.
  std::string image_path;
  std::string question;
  AnswerSet answers;
  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<Sample> samples;
  /// Directory that image paths are relative to.
  std::string root;
  int skipped = 0;
  std::vector<std::string> warnings;

  std::string resolve(const Sample& s) const;
};

/// JSON Lines, one {"id", "image", "question", "answers"} object per line.
/// Blank lines are ignored. Throws on an empty file or a malformed line
/// (naming the line). With `check_images`, samples whose image is missing
/// or undecodable are skipped and counted.
Dataset load_dataset(const std::string& path, bool check_images = true);
void write_dataset(const std::string& path, const std::vector<Sample>& samples);

struct EvalRecord {
  std::string id;
  std::string clean_prediction;
  std::string adv_prediction;
  bool success = false;
  double linf = 0.0;
  double semantic_sim = 1.0;
  int n_substitutions = 0;
  int iterations = 0;
  bool operator==(const EvalRecord&) const = default;
};

struct ReportSummary {
  double asr = 0.0;
  int n = 0;
  std::string config_hash;
  int skipped = 0;
  bool operator==(const ReportSummary&) const = default;
};

struct Report {
  std::vector<EvalRecord> records;
  ReportSummary summary;
};

/// Percentage of successful records. Throws on an empty list.
double compute_asr(const std::vector<EvalRecord>& records);

/// Rounds reals to 6 decimals and computes the summary's asr and n.
Report make_report(std::vector<EvalRecord> records, const std::string& config_hash, int skipped);

/// One JSON line per record, then the summary line.
std::string format_report(const Report& report);
void emit_report(const Report& report, const std::string& path);
Report parse_report(const std::string& text);
Report load_report(const std::string& path);

}  // namespace transvqa
