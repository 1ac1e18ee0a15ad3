#include "doctest.h"
#include "support.hpp"

#include <cmath>

using namespace transvqa;
using testing::image_of;

TEST_CASE("linf_distance examples") {
  CHECK(linf_distance(image_of({0.2, 0.4}), image_of({0.2, 0.4})) == 0.0);
  ImageTensor zeros(Shape{2, 2, 3}, 0.0), offset(Shape{2, 2, 3}, 16.0 / 255.0);
  CHECK(linf_distance(zeros, offset) == doctest::Approx(16.0 / 255.0).epsilon(1e-15));
  CHECK(linf_distance(image_of({0.1, 0.5}), image_of({0.15, 0.3})) == doctest::Approx(0.2));
}

TEST_CASE("linf_distance names both shapes on mismatch") {
  try {
    linf_distance(ImageTensor(Shape{2, 2, 3}), ImageTensor(Shape{2, 3, 3}));
    FAIL("expected an error");
  } catch (const Error& e) {
    std::string msg = e.what();
    CHECK(msg.find("2x2x3") != std::string::npos);
    CHECK(msg.find("2x3x3") != std::string::npos);
  }
}

TEST_CASE("clip_to_budget examples") {
  const double b = 16.0 / 255.0;
  auto inside = image_of({0.5, 0.52});
  CHECK(clip_to_budget(inside, image_of({0.5, 0.5}), b) == inside);
  CHECK(clip_to_budget(image_of({0.8}), image_of({0.5}), b)[0] == 0.5 + b);
  CHECK(clip_to_budget(image_of({-0.2}), image_of({0.01}), b)[0] == 0.0);
  CHECK_THROWS_AS(clip_to_budget(image_of({0.1}), image_of({0.1, 0.2}), b), Error);
}

TEST_CASE("semantic_similarity examples") {
  TokenizedText a{{"a"}, {0}, {}}, b{{"b"}, {0}, {}}, c{{"c"}, {0}, {}};
  testing::TableEncoder enc({{"a", {1, 0}}, {"b", {0, 1}}, {"c", {1, 1}}, {"z", {0, 0}}});
  CHECK(semantic_similarity(a, a, enc) == 1.0);
  CHECK(semantic_similarity(c, c, enc) == 1.0);
  CHECK(semantic_similarity(a, b, enc) == 0.0);
  CHECK(semantic_similarity(c, a, enc) == doctest::Approx(1.0 / std::sqrt(2.0)));
  TokenizedText z{{"z"}, {0}, {}};
  CHECK_THROWS_AS(semantic_similarity(z, a, enc), Error);
}

TEST_CASE("clip and linf properties on random tensors") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Shape s{3, 4, 3};
    auto clean = testing::random_image(s, rng.next());
    ImageTensor x(s), y(s), z(s);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rng.uniform(-0.5, 1.5);
      y[i] = rng.uniform(-0.5, 1.5);
      z[i] = rng.uniform(-0.5, 1.5);
    }
    double budget = rng.uniform(0.0, 0.3);
    auto once = clip_to_budget(x, clean, budget);
    CHECK(clip_to_budget(once, clean, budget) == once);
    CHECK(linf_distance(once, clean) <= budget + 0x1p-52);  // one ulp at pixel scale
    CHECK(once.in_unit_range());
    CHECK(within_budget(once, clean, budget));
    CHECK(linf_distance(x, y) == linf_distance(y, x));
    CHECK(linf_distance(x, z) <= linf_distance(x, y) + linf_distance(y, z) + 1e-15);
  }
}

TEST_CASE("within_budget allows exactly one ulp") {
  auto clean = image_of({0.5});
  const double b = 16.0 / 255.0;
  double edge = 0.5 + b;
  CHECK(within_budget(image_of({edge}), clean, b));
  CHECK(within_budget(image_of({std::nextafter(edge, 2.0)}), clean, b));
  CHECK_FALSE(within_budget(image_of({std::nextafter(std::nextafter(edge, 2.0), 2.0)}), clean, b));
}

TEST_CASE("AnswerSet normalizes duplicates and rejects empty sets") {
  AnswerSet s({"Kitchen", " kitchen ", "cooking area"});
  CHECK(s.size() == 2);
  CHECK(s.answers()[0] == "Kitchen");
  CHECK_THROWS_AS(AnswerSet(std::vector<std::string>{}), Error);
  CHECK_THROWS_AS(AnswerSet({"  "}), Error);
}

TEST_CASE("config defaults and validation") {
  AttackConfig c;
  CHECK(c.image_budget == 16.0 / 255.0);
  CHECK(c.text_sim_threshold == 0.95);
  CHECK(c.max_iters == 20);
  CHECK(c.step_size == 2.0 / 255.0);
  CHECK(c.top_k == 8);
  CHECK_NOTHROW(c.validate());
  c.step_size = 0.1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = AttackConfig{};
  c.max_iters = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = AttackConfig{};
  c.top_k = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("ablation presets nest") {
  auto ie = flags_for(parse_ablation("IE"));
  auto lrp = flags_for(parse_ablation("LRP"));
  auto llm = flags_for(parse_ablation("LLM-E"));
  auto full = flags_for(parse_ablation("full"));
  CHECK(ie == LossFlags{LossFlag::kFeatureImage});
  CHECK(lrp == LossFlags{LossFlag::kFeatureImage, LossFlag::kFeatureMultimodal});
  CHECK(llm.size() == 3);
  CHECK(llm.count(LossFlag::kAntiRecovery) == 1);
  CHECK(full.size() == 4);
  CHECK_THROWS_AS(parse_ablation("bogus"), Error);
  CHECK(parse_loss_flags(format_loss_flags(full)) == full);
  CHECK(parse_loss_flags("").empty());
  CHECK_THROWS_AS(parse_loss_flags("feature_image,nope"), Error);
}

TEST_CASE("round6") {
  CHECK(round6(16.0 / 255.0) == 0.062745);
  CHECK(round6(-0.0000004) == 0.0);
}
