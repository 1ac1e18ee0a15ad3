#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

#include "transvqa/image_attack.hpp"
#include "transvqa/orchestrator.hpp"
#include "transvqa/sentence_encoder.hpp"

#include <fstream>

using namespace transvqa;
using testing::toy;
using nlohmann::json;

namespace {

/// Forwards to the toy model; the n-th loss evaluation returns NaN.
class PoisonedModel final : public VisionLanguageModel {
 public:
  explicit PoisonedModel(int poison_at) : poison_at_(poison_at) {}
  std::string name() const override { return "poisoned"; }
  Capabilities capabilities() const override { return toy().capabilities(); }
  const Tokenizer& tokenizer() const override { return toy().tokenizer(); }
  std::size_t max_text_length() const override { return toy().max_text_length(); }
  Shape image_shape() const override { return toy().image_shape(); }
  LayerFeatures forward_features(const ImageTensor& i, const TokenizedText& t) const override {
    return toy().forward_features(i, t);
  }
  LossGradients loss_and_gradients(const LossSpec& s, const ImageTensor& i,
                                   const TokenizedText& t) const override {
    auto g = toy().loss_and_gradients(s, i, t);
    if (++calls_ == poison_at_) g.image[0] = std::nan("");
    return g;
  }
  MlmDistribution mlm_probabilities(const TokenizedText& t, const std::vector<std::size_t>& p,
                                    const ImageTensor& i) const override {
    return toy().mlm_probabilities(t, p, i);
  }
  using VisionLanguageModel::mlm_probabilities;
  std::vector<double> word_embedding(const TokenizedText& t, std::size_t p) const override {
    return toy().word_embedding(t, p);
  }
  std::vector<double> contextual_embedding(const TokenizedText& t, std::size_t p) const override {
    return toy().contextual_embedding(t, p);
  }

 private:
  int poison_at_;
  mutable int calls_ = 0;
};

struct Fixture {
  LexiconSentenceEncoder encoder;
  OfflineLlmClient client;
  ImageTensor image = ToyModel::random_image(42);
  TokenizedText text = toy().tokenizer().tokenize("what color is the bus?");
  AnswerSet answers{std::vector<std::string>{"red"}};

  AttackResult run(const AttackConfig& cfg, AttackDetails* details = nullptr,
                   const VisionLanguageModel& model = toy()) {
    AttackEnvironment env{model, encoder, client};
    return run_attack(image, text, answers, env, cfg, details);
  }
};

AttackConfig seeded(std::uint64_t seed) {
  AttackConfig c;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("trigger schedule") {
  CHECK(trigger_schedule(20, 3) == std::vector<int>{5, 10, 15, 20});
  CHECK(trigger_schedule(20, 0) == std::vector<int>{20});
  CHECK(trigger_schedule(20, 25).size() == 20);
  CHECK(trigger_stride(20, 25) == 0);
  CHECK(trigger_schedule(1, 0) == std::vector<int>{1});
  CHECK_THROWS_AS(should_trigger_joint(0, 20, 3), Error);
  CHECK_THROWS_AS(should_trigger_joint(21, 20, 3), Error);
  CHECK_THROWS_AS(trigger_schedule(0, 1), Error);
  SUBCASE("exhaustive against multiples of the stride") {
    for (int m_max = 1; m_max <= 40; ++m_max) {
      for (std::size_t w = 0; w <= 10; ++w) {
        int stride = m_max / static_cast<int>(w + 1);
        std::vector<int> want;
        for (int m = 1; m <= m_max; ++m) {
          if (stride == 0 || m % stride == 0) want.push_back(m);
        }
        CHECK(trigger_schedule(m_max, w) == want);
      }
    }
  }
}

TEST_CASE("initialization") {
  auto clean = ToyModel::random_image(3);
  auto text = toy().tokenizer().tokenize("what color is the bus?");
  SUBCASE("zero budget keeps the clean image") {
    AttackConfig c;
    c.image_budget = 0.0;
    Rng rng(1);
    CHECK(initialize(clean, text, c, rng, toy()).image.data() == clean.data());
  }
  SUBCASE("seeded and inside the budget") {
    AttackConfig c;
    for (std::uint64_t s = 0; s < 20; ++s) {
      Rng a(s), b(s);
      auto x = initialize(clean, text, c, a, toy());
      auto y = initialize(clean, text, c, b, toy());
      CHECK(x.image.data() == y.image.data());
      CHECK(within_budget(x.image, clean, c.image_budget));
      CHECK(x.image.in_unit_range());
      CHECK(x.text.words == text.words);
      CHECK(x.candidates.positions.size() == text.informative.size());
    }
  }
  SUBCASE("literal unit noise still clips to the budget") {
    AttackConfig c;
    c.init_noise = InitNoise::kUnitUniform;
    Rng rng(2);
    auto x = initialize(clean, text, c, rng, toy());
    CHECK(within_budget(x.image, clean, c.image_budget));
  }
}

TEST_CASE("attack run contracts") {
  Fixture fx;
  AttackConfig cfg = seeded(9);
  AttackDetails details;
  auto res = fx.run(cfg, &details);

  SUBCASE("one record per iteration, triggers as scheduled") {
    REQUIRE(res.trace.records.size() == 20);
    for (const auto& r : res.trace.records) {
      CHECK(r.joint_triggered == should_trigger_joint(r.iter, 20, fx.text.informative.size()));
      CHECK(r.joint_ran == r.joint_triggered);
      CHECK(r.loss_feature.has_value());
      CHECK(r.loss_anti_recovery.has_value());
      CHECK(r.loss_cross.has_value() == r.joint_triggered);
      CHECK(r.linf_after_step.size() == (r.joint_triggered ? 3u : 2u));
      for (double d : r.linf_after_step) CHECK(d <= cfg.image_budget + 0x1p-52);
      if (!r.joint_triggered) CHECK(r.substitutions.empty());
    }
  }
  SUBCASE("final result respects the constraints") {
    CHECK(within_budget(res.adv_image, fx.image, cfg.image_budget));
    CHECK(res.adv_image.in_unit_range());
    CHECK(res.linf == linf_distance(res.adv_image, fx.image));
    if (res.n_substitutions > 0) CHECK(res.semantic_sim > cfg.text_sim_threshold);
    CHECK(details.candidates.positions.size() == 2);
  }
  SUBCASE("identical seeds give identical results") {
    auto again = fx.run(cfg);
    CHECK(again.adv_image.data() == res.adv_image.data());
    CHECK(again.adv_text.words == res.adv_text.words);
    REQUIRE(again.trace.records.size() == res.trace.records.size());
    for (std::size_t i = 0; i < res.trace.records.size(); ++i) {
      CHECK(again.trace.records[i].loss_feature == res.trace.records[i].loss_feature);
      CHECK(again.trace.records[i].substitutions == res.trace.records[i].substitutions);
    }
    auto other = fx.run(seeded(10));
    CHECK(other.adv_image.data() != res.adv_image.data());
  }
  SUBCASE("snapshot of a seeded full run") {
    std::ifstream in(std::string(TRANSVQA_FIXTURES) + "/goldens.json");
    auto g = json::parse(in)["attack"];
    CHECK(res.adv_text.words == g["adv_words"].get<std::vector<std::string>>());
    CHECK(res.linf == doctest::Approx(g["linf"].get<double>()).epsilon(1e-9));
    CHECK(res.semantic_sim == doctest::Approx(g["semantic_sim"].get<double>()).epsilon(1e-9));
    REQUIRE(g["iterations"].size() == res.trace.records.size());
    for (std::size_t i = 0; i < res.trace.records.size(); ++i) {
      const auto& r = res.trace.records[i];
      const auto& w = g["iterations"][i];
      CHECK(r.loss_feature.value_or(0) == doctest::Approx(w["loss_feature"].get<double>()).epsilon(1e-9));
      CHECK(r.loss_anti_recovery.value_or(0) ==
            doctest::Approx(w["loss_anti_recovery"].get<double>()).epsilon(1e-9));
      CHECK(r.loss_cross.has_value() == !w["loss_cross"].is_null());
      CHECK(r.substitutions.size() == w["substitutions"].size());
    }
  }
}

TEST_CASE("ablations and degenerate runs") {
  Fixture fx;
  SUBCASE("IE skips anti-recovery and the joint attack") {
    AttackConfig cfg = seeded(4);
    cfg.loss_flags = flags_for(Ablation::kImageEncoder);
    auto res = fx.run(cfg);
    for (const auto& r : res.trace.records) {
      CHECK(r.loss_feature.has_value());
      CHECK_FALSE(r.loss_anti_recovery.has_value());
      CHECK_FALSE(r.joint_ran);
      CHECK(r.linf_after_step.size() == 1);
    }
    CHECK(res.adv_text.words == fx.text.words);
    CHECK(res.n_substitutions == 0);
  }
  SUBCASE("all losses off returns the initial image and clean text") {
    AttackConfig cfg = seeded(5);
    cfg.loss_flags.clear();
    AttackDetails details;
    auto res = fx.run(cfg, &details);
    CHECK(res.adv_image.data() == details.initial_image.data());
    CHECK(res.adv_text.words == fx.text.words);
    CHECK(res.trace.records.size() == 20);
  }
  SUBCASE("M = 1 with no informative words") {
    AttackConfig cfg = seeded(6);
    cfg.max_iters = 1;
    fx.text = toy().tokenizer().tokenize("is it?");
    REQUIRE(fx.text.informative.empty());
    auto res = fx.run(cfg);
    REQUIRE(res.trace.records.size() == 1);
    CHECK(res.trace.records[0].joint_triggered);
    CHECK(res.trace.records[0].substitutions.empty());
    CHECK(res.adv_text.words == fx.text.words);
    CHECK(res.adv_image.data() != fx.image.data());
  }
  SUBCASE("non-differentiable model with losses is a setup error") {
    testing::StubModel stub({false, true, true, true});
    AttackConfig cfg = seeded(1);
    fx.image = ImageTensor({4, 4, 3}, 0.5);
    fx.text = stub.tokenizer().tokenize("w0 w1");
    CHECK_THROWS_AS(fx.run(cfg, nullptr, stub), Error);
    cfg.loss_flags.clear();
    CHECK_NOTHROW(fx.run(cfg, nullptr, stub));
  }
  SUBCASE("missing MLM head disables the dependent steps with a note") {
    testing::StubModel stub({true, false, true, true});
    AttackConfig cfg = seeded(1);
    fx.image = ImageTensor({4, 4, 3}, 0.5);
    fx.text = stub.tokenizer().tokenize("w0 w1");
    auto res = fx.run(cfg, nullptr, stub);
    CHECK(res.trace.notes.size() == 2);
    for (const auto& r : res.trace.records) CHECK_FALSE(r.loss_anti_recovery.has_value());
  }
  SUBCASE("non-finite gradient aborts with the trace so far") {
    PoisonedModel poisoned(5);
    try {
      fx.run(seeded(2), nullptr, poisoned);
      FAIL("expected an abort");
    } catch (const AttackAborted& e) {
      CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
      CHECK(e.trace().records.size() == 3);
    }
  }
  SUBCASE("invalid config is rejected") {
    AttackConfig cfg;
    cfg.max_iters = 0;
    CHECK_THROWS_AS(fx.run(cfg), Error);
  }
}

TEST_CASE("feature loss decreases over the run") {
  Fixture fx;
  auto clean = toy().forward_features(fx.image, fx.text);
  const std::set<Encoder> eq3{Encoder::kImage, Encoder::kMultimodal};
  int decreased = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    fx.image = ToyModel::random_image(1000 + s);
    clean = toy().forward_features(fx.image, fx.text);
    AttackDetails details;
    auto res = fx.run(seeded(s), &details);
    double before = feature_loss(clean, toy().forward_features(details.initial_image, fx.text), eq3);
    double after = feature_loss(clean, toy().forward_features(res.adv_image, res.adv_text), eq3);
    decreased += after < before ? 1 : 0;
  }
  CHECK(decreased >= 45);
}
