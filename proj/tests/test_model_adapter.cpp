#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include "transvqa/image_attack.hpp"
#include "transvqa/llm_bridge.hpp"
#include "transvqa/tensor_archive.hpp"

#include <filesystem>
#include <fstream>

using namespace transvqa;
using testing::toy;
using nlohmann::json;

namespace {

const json& goldens() {
  static const json g = [] {
    std::ifstream in(std::string(TRANSVQA_FIXTURES) + "/goldens.json");
    return json::parse(in);
  }();
  return g;
}

TokenizedText bus_question() { return toy().tokenizer().tokenize("what color is the bus?"); }

void check_matrices(const std::vector<Eigen::MatrixXd>& got, const json& want) {
  REQUIRE(got.size() == want.size());
  for (std::size_t l = 0; l < got.size(); ++l) {
    REQUIRE(static_cast<std::size_t>(got[l].rows()) == want[l].size());
    for (Eigen::Index r = 0; r < got[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < got[l].cols(); ++c) {
        CHECK(got[l](r, c) == doctest::Approx(want[l][r][c].get<double>()).epsilon(1e-9));
      }
    }
  }
}

bool identical(const LayerFeatures& a, const LayerFeatures& b) {
  auto same = [](const auto& x, const auto& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].rows() != y[i].rows() || x[i].cols() != y[i].cols() || x[i] != y[i]) return false;
    }
    return true;
  };
  return same(a.image, b.image) && same(a.text, b.text) && same(a.multimodal, b.multimodal);
}

std::vector<MaskedTemplate> templates_for(const TokenizedText& text, AnswerSet answers) {
  OfflineLlmClient client;
  return build_masked_templates(text, answers, toy().tokenizer(), client,
                                default_prompt_template())
      .templates;
}

}  // namespace

TEST_CASE("forward features match the recorded snapshot") {
  auto f = toy().forward_features(ToyModel::random_image(42), bus_question());
  const auto& g = goldens()["forward"];
  check_matrices(f.image, g["image"]);
  check_matrices(f.text, g["text"]);
  check_matrices(f.multimodal, g["multimodal"]);
  CHECK(f.image.size() == 2);
  CHECK(f.text.size() == 1);
  CHECK(f.multimodal.size() == 2);
  CHECK(f.all_finite());
}

TEST_CASE("forward features are a pure function of the inputs") {
  auto img = ToyModel::random_image(7);
  auto text = bus_question();
  CHECK(identical(toy().forward_features(img, text), toy().forward_features(img, text)));
  ToyModel other;
  CHECK(identical(toy().forward_features(img, text), other.forward_features(img, text)));
}

TEST_CASE("one pixel changes the features") {
  auto img = ToyModel::random_image(8);
  auto text = bus_question();
  for (std::size_t i : {0ul, 100ul, 767ul}) {
    auto moved = img;
    moved[i] = moved[i] > 0.5 ? moved[i] - 0.25 : moved[i] + 0.25;
    CHECK_FALSE(identical(toy().forward_features(img, text), toy().forward_features(moved, text)));
  }
}

TEST_CASE("input validation") {
  auto text = bus_question();
  SUBCASE("over-length text") {
    std::string q;
    for (int i = 0; i < 41; ++i) q += "bus ";
    CHECK_THROWS_AS(toy().forward_features(ToyModel::random_image(1), toy().tokenizer().tokenize(q)),
                    Error);
  }
  SUBCASE("wrong image shape") {
    CHECK_THROWS_AS(toy().forward_features(ImageTensor({8, 8, 3}), text), Error);
  }
  SUBCASE("mask index out of range") {
    CHECK_THROWS_AS(toy().mlm_probabilities(text, {text.size()}, ToyModel::random_image(1)), Error);
  }
}

TEST_CASE("MLM distribution") {
  auto img = ToyModel::random_image(42);
  auto masked = toy().tokenizer().with_word(bus_question(), 4, std::string(Vocabulary::kMask));
  auto d = toy().mlm_probabilities(masked, {4}, img);
  REQUIRE(d.probs.size() == 1);
  const auto& want = goldens()["mlm"];
  REQUIRE(d.probs[0].size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(d.probs[0][i] == doctest::Approx(want[i].get<double>()).epsilon(1e-9));
  }

  SUBCASE("rows sum to one") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      auto text = toy().tokenizer().tokenize("is the man holding a red umbrella?");
      std::vector<std::size_t> all(text.size());
      for (std::size_t p = 0; p < all.size(); ++p) all[p] = p;
      auto dist = toy().mlm_probabilities(text, all, ToyModel::random_image(s));
      CHECK(dist.positions == all);
      for (const auto& row : dist.probs) {
        double sum = 0;
        for (double p : row) {
          CHECK(p >= 0.0);
          sum += p;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);
      }
    }
  }
  SUBCASE("uniform head over ten entries") {
    testing::StubModel stub;
    auto text = stub.tokenizer().tokenize("w0 w1 w2");
    auto dist = stub.mlm_probabilities(text, {0, 2}, ImageTensor({4, 4, 3}));
    for (const auto& row : dist.probs) {
      REQUIRE(row.size() == 10);
      for (double p : row) CHECK(p == doctest::Approx(0.1));
    }
  }
}

TEST_CASE("image gradients agree with central differences") {
  Rng rng(11);
  auto text = bus_question();
  auto clean = toy().forward_features(ToyModel::random_image(300), text);
  auto templates = templates_for(text, AnswerSet({"red", "hot dog"}));
  REQUIRE_FALSE(templates.empty());
  std::vector<LossSpec> specs{
      LossSpec::feature(clean, {Encoder::kImage}),
      LossSpec::feature(clean, {Encoder::kMultimodal}),
      LossSpec::feature(clean, {Encoder::kImage, Encoder::kMultimodal, Encoder::kText}),
      LossSpec::anti_recovery(templates)};
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto img = ToyModel::random_image(400 + s);
    for (const auto& spec : specs) {
      auto rep = oracles::check_image_gradient(toy(), spec, img, text, 100, rng);
      CHECK(rep.failures == 0);
      CHECK(rep.worst <= 1e-4);
    }
  }
}

TEST_CASE("word-embedding gradients agree with central differences") {
  Rng rng(12);
  auto text = bus_question();
  auto clean = toy().forward_features(ToyModel::random_image(301), text);
  auto spec = LossSpec::feature(clean, {Encoder::kImage, Encoder::kMultimodal, Encoder::kText});
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto rep = oracles::check_embedding_gradient(toy(), spec, ToyModel::random_image(500 + s),
                                                 text, 100, rng, 1e-4);
    CHECK(rep.failures == 0);
  }
}

TEST_CASE("gradient contracts") {
  auto img = ToyModel::random_image(3);
  auto text = bus_question();
  auto clean = toy().forward_features(ToyModel::random_image(4), text);
  auto spec = LossSpec::feature(clean, {Encoder::kImage, Encoder::kMultimodal, Encoder::kText});

  SUBCASE("finite and shaped like the input") {
    auto g = toy().gradient_wrt_image(spec, img, text);
    CHECK(g.shape() == img.shape());
    for (double v : g.data()) CHECK(std::isfinite(v));
  }
  SUBCASE("scaling the loss by 2 doubles the gradient exactly") {
    auto spec2 = LossSpec::feature(clean, std::get<FeatureLoss>(spec.term).encoders, 2.0);
    auto a = toy().loss_and_gradients(spec, img, text);
    auto b = toy().loss_and_gradients(spec2, img, text);
    CHECK(b.loss == 2.0 * a.loss);
    for (std::size_t i = 0; i < a.image.size(); ++i) CHECK(b.image[i] == 2.0 * a.image[i]);
    for (std::size_t p = 0; p < a.word_embeddings.size(); ++p) {
      for (std::size_t d = 0; d < a.word_embeddings[p].size(); ++d) {
        CHECK(b.word_embeddings[p][d] == 2.0 * a.word_embeddings[p][d]);
      }
    }
  }
  SUBCASE("stop-word positions still receive a gradient") {
    auto g = toy().gradient_wrt_word_embeddings(spec, img, text);
    REQUIRE(g.size() == text.size());
    REQUIRE(text.words[2] == "is");
    double norm = 0;
    for (double v : g[2]) norm += v * v;
    CHECK(norm > 0.0);
  }
  SUBCASE("constant head gives zero gradients") {
    testing::StubModel stub;
    auto stext = stub.tokenizer().tokenize("w0 w1");
    auto sclean = stub.forward_features(ImageTensor({4, 4, 3}), stext);
    auto sspec = LossSpec::feature(sclean, {Encoder::kImage, Encoder::kText});
    auto sg = stub.gradient_wrt_image(sspec, testing::random_image({4, 4, 3}, 1), stext);
    for (double v : sg.data()) CHECK(v == 0.0);
    for (const auto& row : stub.gradient_wrt_word_embeddings(sspec, ImageTensor({4, 4, 3}), stext)) {
      for (double v : row) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("toy capabilities") {
  auto c = toy().capabilities();
  CHECK(c.differentiable);
  CHECK(c.mlm_head);
  CHECK(c.contextual_embeddings);
  CHECK(toy().image_shape() == Shape{16, 16, 3});
}

TEST_CASE("tensor archive") {
  SUBCASE("round trip in memory and on disk") {
    TensorArchive a;
    a.put("w", {2, 3}, {1, 2, 3, 4, 5, 6});
    a.put("b", {1}, {-0.5});
    auto b = TensorArchive::deserialize(a.serialize());
    CHECK(b.names() == std::vector<std::string>{"w", "b"});
    CHECK(b.get("w").values == a.get("w").values);
    CHECK(b.get("b").shape == std::vector<std::int64_t>{1});
    auto path = std::filesystem::temp_directory_path() / "transvqa_archive_test.tvqa";
    a.save(path.string());
    CHECK(TensorArchive::load(path.string()).serialize() == a.serialize());
    std::filesystem::remove(path);
  }
  SUBCASE("malformed input") {
    TensorArchive a;
    CHECK_THROWS_AS(a.put("x", {2, 2}, {1, 2, 3}), Error);
    a.put("x", {1}, {1});
    CHECK_THROWS_AS(a.get("missing"), Error);
    auto bytes = a.serialize();
    CHECK_THROWS_AS(TensorArchive::deserialize("NOTMAGIC" + bytes.substr(8)), Error);
    CHECK_THROWS_AS(TensorArchive::deserialize(bytes.substr(0, bytes.size() - 3)), Error);
  }
  SUBCASE("shipped weights reproduce the seeded model") {
    auto archive = TensorArchive::load(std::string(TRANSVQA_SOURCE_DIR) + "/data/toy_weights.tvqa");
    auto loaded = ToyModel::from_archive(archive);
    auto img = ToyModel::random_image(42);
    auto text = bus_question();
    CHECK(identical(loaded.forward_features(img, text), toy().forward_features(img, text)));
    CHECK(loaded.predict(img, "what color is the bus?") == toy().predict(img, "what color is the bus?"));
  }
  SUBCASE("image sidecar keeps full precision") {
    auto img = ToyModel::random_image(77);
    auto path = std::filesystem::temp_directory_path() / "transvqa_sidecar_test.tensor";
    save_image_tensor(path.string(), img);
    auto back = load_image_tensor(path.string());
    CHECK(back.shape() == img.shape());
    CHECK(back.data() == img.data());
    std::filesystem::remove(path);
  }
}

TEST_CASE("victim answers from its answer vocabulary") {
  const auto& answers = toy().answer_vocabulary();
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto a = toy().predict(ToyModel::random_image(s), "what color is the bus?");
    CHECK(std::find(answers.begin(), answers.end(), a) != answers.end());
  }
  auto logits = toy().answer_logits(ToyModel::random_image(1), "what color is the bus?");
  CHECK(logits.size() == answers.size());
}
