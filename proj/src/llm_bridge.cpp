#include "transvqa/llm_bridge.hpp"

#include "json.hpp"

#ifdef __GNUC__
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wdeprecated-declarations"
#endif
#include "httplib.h"
#ifdef __GNUC__
#pragma GCC diagnostic pop
#endif

#include <algorithm>
#include <cctype>
#include <fstream>
#include <mutex>
#include <sstream>

namespace transvqa {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  std::size_t at = 0;
  while ((at = s.find(from, at)) != std::string::npos) {
    s.replace(at, from.size(), to);
    at += to.size();
  }
  return s;
}

std::string strip_wrapping_quotes(std::string s) {
  while (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                           (s.front() == '\'' && s.back() == '\''))) {
    s = trim(s.substr(1, s.size() - 2));
  }
  return s;
}

const char* const kChatterPrefixes[] = {
    "sure",         "here is",   "here's",  "certainly", "of course", "okay",
    "ok,",          "ok ",       "as an ai", "i'm sorry", "sorry",    "the declarative sentence",
    "declarative sentence", "output:", "answer:", "sentence:",
};

}  // namespace

const std::string& default_prompt_template() {
  static const std::string prompt =
      "Please combine the question \"{question}\" and the answer \"{answer}\" into a "
      "declarative sentence.\n"
      "Constraints:\n"
      "1. The term \"{answer}\" must appear in the output.\n"
      "2. Please only output the declarative sentence.\n";
  return prompt;
}

std::string load_prompt_template(const std::string& path) {
  if (path.empty()) return default_prompt_template();
  std::ifstream in(path);
  if (!in) throw Error("cannot read prompt template " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  auto text = ss.str();
  if (text.find("{question}") == std::string::npos || text.find("{answer}") == std::string::npos) {
    throw Error("prompt template " + path + " must contain {question} and {answer}");
  }
  return text;
}

std::string render_prompt(const std::string& prompt_template, const std::string& question,
                          const std::string& answer) {
  return replace_all(replace_all(prompt_template, "{question}", question), "{answer}", answer);
}

std::string fallback_sentence(const std::string& question, const std::string& answer) {
  return "the answer to the question '" + lower(trim(question)) + "' is " + lower(trim(answer));
}

bool validate_reply(const std::string& reply, const std::string& answer, std::string* why) {
  auto fail = [&](const std::string& reason) {
    if (why) *why = reason;
    return false;
  };
  std::string text = strip_wrapping_quotes(trim(reply));
  if (text.empty()) return fail("empty reply");
  if (text.find('\n') != std::string::npos) return fail("multi-line reply");
  const std::string low = lower(text);
  for (const char* prefix : kChatterPrefixes) {
    if (low.rfind(prefix, 0) == 0) return fail(std::string("conversational prefix '") + prefix + "'");
  }
  // One sentence: terminators may only appear at the very end.
  for (std::size_t i = 0; i + 1 < text.size(); ++i) {
    char c = text[i];
    if ((c == '.' || c == '!' || c == '?') && std::isspace(static_cast<unsigned char>(text[i + 1]))) {
      auto rest = trim(text.substr(i + 1));
      if (!rest.empty() && std::isalpha(static_cast<unsigned char>(rest.front()))) {
        return fail("more than one sentence");
      }
    }
  }
  if (low.find(lower(trim(answer))) == std::string::npos) return fail("answer missing from reply");
  if (why) why->clear();
  return true;
}

Composition compose_declarative(const std::string& question, const std::string& answer,
                                const std::string& prompt_template, LlmClient& client) {
  if (trim(question).empty() || trim(answer).empty()) {
    throw Error("compose_declarative needs a non-empty question and answer");
  }
  Composition c;
  auto reply = client.complete(render_prompt(prompt_template, question, answer));
  std::string why;
  if (!reply) {
    c.reason = client.name() == "offline" ? "offline client" : "no reply from LLM endpoint";
  } else if (validate_reply(*reply, answer, &why)) {
    c.sentence = strip_wrapping_quotes(trim(*reply));
    return c;
  } else {
    c.reason = "reply rejected: " + why;
  }
  c.used_fallback = true;
  c.sentence = fallback_sentence(question, answer);
  if (lower(c.sentence).find(lower(trim(answer))) == std::string::npos) {
    throw Error("fallback sentence lost the answer '" + answer + "'");
  }
  return c;
}

std::optional<MaskedTemplate> mask_answer(const std::string& sentence, const std::string& answer,
                                          const Tokenizer& tokenizer) {
  auto answer_words = Tokenizer::split_words(answer);
  if (answer_words.empty()) return std::nullopt;
  TokenizedText full = tokenizer.tokenize(sentence);
  if (full.size() < answer_words.size()) return std::nullopt;
  for (std::size_t start = 0; start + answer_words.size() <= full.size(); ++start) {
    if (!std::equal(answer_words.begin(), answer_words.end(), full.words.begin() + start)) {
      continue;
    }
    MaskedTemplate t;
    t.answer = answer;
    t.sentence = sentence;
    t.text = full;
    const auto& vocab = tokenizer.vocab();
    for (std::size_t k = 0; k < answer_words.size(); ++k) {
      std::size_t pos = start + k;
      t.mask_indices.push_back(pos);
      t.target_ids[pos] = vocab.id(full.words[pos]);
      t.target_words[pos] = full.words[pos];
      t.text.words[pos] = std::string(Vocabulary::kMask);
      t.text.token_ids[pos] = vocab.mask_id();
    }
    t.text.informative.erase(
        std::remove_if(t.text.informative.begin(), t.text.informative.end(),
                       [&](std::size_t i) { return t.target_ids.count(i) != 0; }),
        t.text.informative.end());
    return t;
  }
  return std::nullopt;
}

std::string restore_template(const MaskedTemplate& tpl, const Tokenizer& tokenizer) {
  TokenizedText t = tpl.text;
  for (const auto& [pos, word] : tpl.target_words) {
    t.words[pos] = word;
    t.token_ids[pos] = tpl.target_ids.at(pos);
  }
  return tokenizer.detokenize(t);
}

TemplateBuild build_masked_templates(const TokenizedText& question_adv, const AnswerSet& answers,
                                     const Tokenizer& tokenizer, LlmClient& client,
                                     const std::string& prompt_template) {
  if (answers.size() == 0) throw Error("no answers to build templates from");
  TemplateBuild out;
  const std::string question = tokenizer.detokenize(question_adv);
  for (const auto& answer : answers.answers()) {
    auto comp = compose_declarative(question, answer, prompt_template, client);
    if (comp.used_fallback) {
      out.warnings.push_back("fallback template for answer '" + answer + "': " + comp.reason);
    }
    auto tpl = mask_answer(comp.sentence, answer, tokenizer);
    if (!tpl) {
      out.warnings.push_back("answer '" + answer + "' not located in composed sentence");
    } else {
      out.templates.push_back(std::move(*tpl));
    }
    out.compositions.push_back(std::move(comp));
  }
  if (out.templates.empty()) throw Error("no answer could be located in any composed sentence");
  return out;
}

const TemplateBuild& TemplateCache::get(const TokenizedText& question_adv, const AnswerSet& answers,
                                        const Tokenizer& tokenizer, LlmClient& client,
                                        const std::string& prompt_template, bool* rebuilt) {
  std::string key = tokenizer.detokenize(question_adv);
  for (const auto& a : answers.answers()) key += '\x1f' + a;
  {
    std::shared_lock lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      if (rebuilt) *rebuilt = false;
      return *it->second;
    }
  }
  auto build = std::make_unique<TemplateBuild>(
      build_masked_templates(question_adv, answers, tokenizer, client, prompt_template));
  std::unique_lock lock(mu_);
  auto [it, inserted] = entries_.emplace(key, std::move(build));
  if (rebuilt) *rebuilt = inserted;
  return *it->second;
}

std::size_t TemplateCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

HttpLlmClient::HttpLlmClient(HttpLlmOptions options)
    : options_(std::move(options)), slots_(std::clamp(options_.max_concurrent, 1, 64)) {
  const auto& url = options_.endpoint;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("LLM endpoint must be an http(s) URL: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  base_ = path_start == std::string::npos ? url : url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw Error("unsupported LLM endpoint scheme " + scheme);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") throw Error("this build has no TLS support for https endpoints");
#endif
}

std::optional<std::string> HttpLlmClient::complete(const std::string& prompt) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<64>& s;
    ~Release() { s.release(); }
  } release{slots_};

  nlohmann::json body = {{"model", options_.model}, {"prompt", prompt}};
  const std::string payload = body.dump();
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    ++attempts_;
    httplib::Client cli(base_);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    auto res = cli.Post(path_, headers, payload, "application/json");
    if (!res || res->status != 200) continue;
    try {
      auto reply = nlohmann::json::parse(res->body);
      if (reply.contains("text") && reply["text"].is_string()) {
        return reply["text"].get<std::string>();
      }
    } catch (const nlohmann::json::exception&) {
    }
  }
  return std::nullopt;
}

}  // namespace transvqa
