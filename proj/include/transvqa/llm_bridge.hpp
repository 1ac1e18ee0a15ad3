#pragma once

#include "transvqa/core.hpp"
#include "transvqa/model_adapter.hpp"
#include "transvqa/tokenizer.hpp"

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <vector>

namespace transvqa {

/// Text-completion backend. Returns nullopt on any transport failure,
/// timeout or refusal; callers then fall back to the offline template.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::optional<std::string> complete(const std::string& prompt) = 0;
  virtual std::string name() const = 0;
};

/// Never contacts anything; every composition uses the fallback template.
class OfflineLlmClient final : public LlmClient {
 public:
  std::optional<std::string> complete(const std::string&) override { return std::nullopt; }
  std::string name() const override { return "offline"; }
};

struct HttpLlmOptions {
  std::string endpoint;  // http(s)://host[:port]/path
  std::string model;
  std::string api_key;
  std::chrono::milliseconds timeout{10000};
  int retries = 2;
  int max_concurrent = 4;
};

/// POSTs {"model", "prompt"} as JSON with a bearer token and reads "text"
/// from the JSON reply.
class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(HttpLlmOptions options);
  std::optional<std::string> complete(const std::string& prompt) override;
  std::string name() const override { return "endpoint"; }

  int attempts_made() const { return attempts_; }

 private:
  HttpLlmOptions options_;
  std::string base_;
  std::string path_;
  std::counting_semaphore<64> slots_;
  std::atomic<int> attempts_{0};
};

/// Prompt with {question} and {answer} placeholders: a task description
/// followed by the two output constraints.
const std::string& default_prompt_template();
std::string load_prompt_template(const std::string& path);
std::string render_prompt(const std::string& prompt_template, const std::string& question,
                          const std::string& answer);

/// "the answer to the question '<question>' is <answer>", lowercased.
std::string fallback_sentence(const std::string& question, const std::string& answer);

/// Accepts a reply only if it is one line, carries no conversational
/// prefix, holds a single sentence and contains the answer
/// (case-insensitive). On rejection `why` receives the reason.
bool validate_reply(const std::string& reply, const std::string& answer, std::string* why);

struct Composition {
  std::string sentence;
  bool used_fallback = false;
  std::string reason;
};

Composition compose_declarative(const std::string& question, const std::string& answer,
                                const std::string& prompt_template, LlmClient& client);

struct TemplateBuild {
  std::vector<MaskedTemplate> templates;
  std::vector<Composition> compositions;
  std::vector<std::string> warnings;
};

/// Locates the first case-insensitive occurrence of each answer's token
/// span in its composed sentence and masks every token of it. Answers whose
/// span cannot be found are skipped with a warning; throws if none remain.
TemplateBuild build_masked_templates(const TokenizedText& question_adv, const AnswerSet& answers,
                                     const Tokenizer& tokenizer, LlmClient& client,
                                     const std::string& prompt_template);

/// Builds a template for an already composed sentence. nullopt when the
/// answer span is absent.
std::optional<MaskedTemplate> mask_answer(const std::string& sentence, const std::string& answer,
                                          const Tokenizer& tokenizer);

/// Restores target words into a template and detokenizes.
std::string restore_template(const MaskedTemplate& tpl, const Tokenizer& tokenizer);

/// Memoizes template builds per question text; concurrent readers, exclusive
/// writers.
class TemplateCache {
 public:
  const TemplateBuild& get(const TokenizedText& question_adv, const AnswerSet& answers,
                           const Tokenizer& tokenizer, LlmClient& client,
                           const std::string& prompt_template, bool* rebuilt = nullptr);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::unique_ptr<TemplateBuild>> entries_;
};

}  // namespace transvqa
