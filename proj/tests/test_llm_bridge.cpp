#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

#include "transvqa/llm_bridge.hpp"

// After Eigen: <resolv.h> defines a _res macro that collides with Eigen internals.
#include "httplib.h"

#include <atomic>
#include <deque>
#include <mutex>
#include <thread>

using namespace transvqa;
using nlohmann::json;

namespace {

/// Replays canned replies in order; nullopt once exhausted.
class ScriptedClient final : public LlmClient {
 public:
  explicit ScriptedClient(std::deque<std::optional<std::string>> replies)
      : replies_(std::move(replies)) {}
  std::optional<std::string> complete(const std::string& prompt) override {
    prompts.push_back(prompt);
    if (replies_.empty()) return std::nullopt;
    auto r = replies_.front();
    replies_.pop_front();
    return r;
  }
  std::string name() const override { return "scripted"; }
  std::vector<std::string> prompts;

 private:
  std::deque<std::optional<std::string>> replies_;
};

Tokenizer food_tokenizer() {
  return Tokenizer(Vocabulary({"the", "answer", "to", "question", "what", "is", "on", "plate",
                               "a", "hot", "dog", "kitchen", "room", "this", "it", "'"}));
}

/// httplib server on an ephemeral port, running until destruction.
class LocalServer {
 public:
  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/complete", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/complete"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string reply_json(const std::string& text) { return json{{"text", text}}.dump(); }

}  // namespace

TEST_CASE("composition") {
  SUBCASE("offline fallback") {
    OfflineLlmClient offline;
    auto c = compose_declarative("What room is this?", "kitchen", default_prompt_template(), offline);
    CHECK(c.used_fallback);
    CHECK(c.sentence == "the answer to the question 'what room is this?' is kitchen");
    CHECK(c.sentence.find("kitchen") != std::string::npos);
  }
  SUBCASE("valid reply is used as is") {
    ScriptedClient client({std::string("This room is a kitchen.")});
    auto c = compose_declarative("What room is this?", "kitchen", default_prompt_template(), client);
    CHECK_FALSE(c.used_fallback);
    CHECK(c.sentence == "This room is a kitchen.");
    REQUIRE(client.prompts.size() == 1);
    CHECK(client.prompts[0].find("What room is this?") != std::string::npos);
    CHECK(client.prompts[0].find("kitchen") != std::string::npos);
  }
  SUBCASE("reply without the answer falls back and says why") {
    ScriptedClient client({std::string("This is a bedroom.")});
    auto c = compose_declarative("What room is this?", "kitchen", default_prompt_template(), client);
    CHECK(c.used_fallback);
    CHECK(c.reason.find("answer missing") != std::string::npos);
  }
  SUBCASE("conversational prefix is rejected") {
    ScriptedClient client({std::string("Sure, here is the sentence: this room is a kitchen.")});
    auto c = compose_declarative("What room is this?", "kitchen", default_prompt_template(), client);
    CHECK(c.used_fallback);
    CHECK(c.reason.find("prefix") != std::string::npos);
  }
  SUBCASE("validation rules") {
    std::string why;
    CHECK(validate_reply("The bus is RED.", "red", &why));
    CHECK_FALSE(validate_reply("The bus is red.\nAnything else?", "red", &why));
    CHECK_FALSE(validate_reply("The bus is red. It is big.", "red", &why));
    CHECK_FALSE(validate_reply("Here is your sentence: the bus is red", "red", &why));
    CHECK_FALSE(why.empty());
  }
  SUBCASE("empty inputs are errors") {
    OfflineLlmClient offline;
    CHECK_THROWS_AS(compose_declarative("", "x", default_prompt_template(), offline), Error);
    CHECK_THROWS_AS(compose_declarative("q?", "  ", default_prompt_template(), offline), Error);
  }
  SUBCASE("never returns a sentence without the answer") {
    std::vector<std::optional<std::string>> replies{
        std::nullopt, std::string(""), std::string("Certainly! The bus is red."),
        std::string("It is blue."), std::string("the bus is red"), std::string("RED bus.")};
    for (const auto& r : replies) {
      ScriptedClient client({r});
      auto c = compose_declarative("what color is the bus?", "red", default_prompt_template(), client);
      std::string low = c.sentence;
      for (auto& ch : low) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      CHECK(low.find("red") != std::string::npos);
    }
  }
}

TEST_CASE("prompt template") {
  const auto& t = default_prompt_template();
  CHECK(t.find("{question}") != std::string::npos);
  CHECK(t.find("{answer}") != std::string::npos);
  auto p = render_prompt("A {question} B {answer} C {answer}", "q?", "ans");
  CHECK(p == "A q? B ans C ans");
  CHECK_THROWS_AS(load_prompt_template("/nonexistent/prompt.txt"), Error);
}

TEST_CASE("masked templates") {
  auto tok = food_tokenizer();
  OfflineLlmClient offline;
  SUBCASE("single-token answer masks one position") {
    auto b = build_masked_templates(tok.tokenize("what room is this?"), AnswerSet({"kitchen"}), tok,
                                    offline, default_prompt_template());
    REQUIRE(b.templates.size() == 1);
    CHECK(b.templates[0].mask_indices.size() == 1);
    auto p = b.templates[0].mask_indices[0];
    CHECK(b.templates[0].text.words[p] == std::string(Vocabulary::kMask));
    CHECK(b.templates[0].target_words.at(p) == "kitchen");
    CHECK(b.templates[0].target_ids.at(p) == tok.vocab().id("kitchen"));
  }
  SUBCASE("two-token answer masks both") {
    auto b = build_masked_templates(tok.tokenize("what is on the plate?"), AnswerSet({"hot dog"}),
                                    tok, offline, default_prompt_template());
    REQUIRE(b.templates.size() == 1);
    const auto& t = b.templates[0];
    REQUIRE(t.mask_indices.size() == 2);
    CHECK(t.mask_indices[1] == t.mask_indices[0] + 1);
    CHECK(t.target_words.at(t.mask_indices[0]) == "hot");
    CHECK(t.target_words.at(t.mask_indices[1]) == "dog");
  }
  SUBCASE("order preserved across answers") {
    auto b = build_masked_templates(tok.tokenize("what is on the plate?"),
                                    AnswerSet({"hot dog", "kitchen", "plate"}), tok, offline,
                                    default_prompt_template());
    REQUIRE(b.templates.size() == 3);
    CHECK(b.templates[0].answer == "hot dog");
    CHECK(b.templates[1].answer == "kitchen");
    CHECK(b.templates[2].answer == "plate");
    CHECK(b.warnings.size() == 3);
  }
  SUBCASE("first occurrence is masked") {
    auto t = mask_answer("the dog sees a dog", "dog", tok);
    REQUIRE(t);
    CHECK(t->mask_indices == std::vector<std::size_t>{1});
  }
  SUBCASE("answers not located are skipped, all skipped is an error") {
    ScriptedClient client({std::string("It is a hot-dog."), std::string("a hot dog it is.")});
    auto b = build_masked_templates(tok.tokenize("what is on the plate?"),
                                    AnswerSet({"hot dog", "hot dog!"}), tok, client,
                                    default_prompt_template());
    CHECK(b.templates.size() >= 1);
    CHECK_FALSE(mask_answer("nothing here", "kitchen", tok));
    CHECK_THROWS_AS(build_masked_templates(tok.tokenize("what?"), AnswerSet(std::vector<std::string>{}),
                                           tok, offline, default_prompt_template()),
                    Error);
  }
  SUBCASE("restoring targets reproduces the composed sentence") {
    const char* qs[] = {"what room is this?", "what is on the plate?", "is it a hot dog?"};
    const char* as[] = {"kitchen", "hot dog", "a", "the plate"};
    for (auto q : qs) {
      for (auto a : as) {
        auto b = build_masked_templates(tok.tokenize(q), AnswerSet({a}), tok, offline,
                                        default_prompt_template());
        for (const auto& t : b.templates) {
          CHECK(restore_template(t, tok) == tok.detokenize(tok.tokenize(t.sentence)));
          CHECK_FALSE(t.mask_indices.empty());
          for (auto p : t.mask_indices) CHECK(p < t.text.size());
        }
      }
    }
  }
  SUBCASE("offline builds are deterministic") {
    auto a = build_masked_templates(tok.tokenize("what room is this?"), AnswerSet({"kitchen", "room"}),
                                    tok, offline, default_prompt_template());
    auto b = build_masked_templates(tok.tokenize("what room is this?"), AnswerSet({"kitchen", "room"}),
                                    tok, offline, default_prompt_template());
    REQUIRE(a.templates.size() == b.templates.size());
    for (std::size_t i = 0; i < a.templates.size(); ++i) {
      CHECK(a.templates[i].text.token_ids == b.templates[i].text.token_ids);
      CHECK(a.templates[i].target_ids == b.templates[i].target_ids);
    }
  }
}

TEST_CASE("template cache") {
  auto tok = food_tokenizer();
  ScriptedClient client({});
  TemplateCache cache;
  bool rebuilt = false;
  auto q = tok.tokenize("what room is this?");
  cache.get(q, AnswerSet({"kitchen"}), tok, client, default_prompt_template(), &rebuilt);
  CHECK(rebuilt);
  cache.get(q, AnswerSet({"kitchen"}), tok, client, default_prompt_template(), &rebuilt);
  CHECK_FALSE(rebuilt);
  CHECK(client.prompts.size() == 1);
  cache.get(tok.tokenize("what is this?"), AnswerSet({"kitchen"}), tok, client,
            default_prompt_template(), &rebuilt);
  CHECK(rebuilt);
  CHECK(cache.size() == 2);

  SUBCASE("concurrent readers") {
    OfflineLlmClient offline;
    TemplateCache shared;
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int i = 0; i < 8; ++i) {
      threads.emplace_back([&, i] {
        auto text = tok.tokenize(i % 2 ? "what room is this?" : "what is on the plate?");
        for (int k = 0; k < 50; ++k) {
          const auto& b = shared.get(text, AnswerSet({"kitchen"}), tok, offline,
                                     default_prompt_template());
          if (b.templates.size() == 1) ++ok;
        }
      });
    }
    for (auto& t : threads) t.join();
    CHECK(ok == 400);
    CHECK(shared.size() == 2);
  }
}

TEST_CASE("HTTP client") {
  SUBCASE("sends model, prompt and bearer token; reads text") {
    std::mutex mu;
    json seen;
    std::string auth;
    LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      seen = json::parse(req.body);
      auth = req.get_header_value("Authorization");
      res.set_content(reply_json("The bus is red."), "application/json");
    });
    HttpLlmClient client({server.url(), "tiny-lm", "secret", std::chrono::milliseconds(2000), 2, 4});
    auto r = client.complete("compose please");
    REQUIRE(r);
    CHECK(*r == "The bus is red.");
    CHECK(seen["model"] == "tiny-lm");
    CHECK(seen["prompt"] == "compose please");
    CHECK(auth == "Bearer secret");
    CHECK(client.attempts_made() == 1);
  }
  SUBCASE("retries server errors then succeeds") {
    std::atomic<int> calls{0};
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
      if (++calls < 3) {
        res.status = 503;
        return;
      }
      res.set_content(reply_json("ok red"), "application/json");
    });
    HttpLlmClient client({server.url(), "m", "", std::chrono::milliseconds(2000), 2, 1});
    CHECK(client.complete("p") == std::optional<std::string>("ok red"));
    CHECK(calls == 3);
  }
  SUBCASE("gives up after the retries and the composer falls back") {
    std::atomic<int> calls{0};
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
      ++calls;
      res.set_content("not json", "text/plain");
    });
    HttpLlmClient client({server.url(), "m", "", std::chrono::milliseconds(2000), 2, 1});
    auto c = compose_declarative("what color is the bus?", "red", default_prompt_template(), client);
    CHECK(c.used_fallback);
    CHECK(calls == 3);
  }
  SUBCASE("slow replies time out") {
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(600));
      res.set_content(reply_json("late red"), "application/json");
    });
    HttpLlmClient client({server.url(), "m", "", std::chrono::milliseconds(150), 0, 1});
    CHECK_FALSE(client.complete("p"));
  }
  SUBCASE("unreachable endpoint") {
    HttpLlmClient client({"http://127.0.0.1:1/x", "m", "", std::chrono::milliseconds(200), 1, 1});
    CHECK_FALSE(client.complete("p"));
    CHECK(client.attempts_made() == 2);
  }
  SUBCASE("concurrency cap") {
    std::atomic<int> in_flight{0}, peak{0};
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
      int now = ++in_flight;
      int prev = peak.load();
      while (now > prev && !peak.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      --in_flight;
      res.set_content(reply_json("red"), "application/json");
    });
    HttpLlmClient client({server.url(), "m", "", std::chrono::milliseconds(5000), 0, 2});
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int i = 0; i < 8; ++i) {
      threads.emplace_back([&] {
        if (client.complete("p")) ++ok;
      });
    }
    for (auto& t : threads) t.join();
    CHECK(ok == 8);
    CHECK(peak <= 2);
  }
  SUBCASE("bad endpoints") {
    CHECK_THROWS_AS(HttpLlmClient({"localhost:8080", "m"}), Error);
    CHECK_THROWS_AS(HttpLlmClient({"ftp://host/x", "m"}), Error);
  }
}
