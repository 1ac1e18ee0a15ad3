#include "doctest.h"
#include "support.hpp"

#include "transvqa/tokenizer.hpp"

#include <fstream>

using namespace transvqa;

TEST_CASE("tokenize example from the stop-word list") {
  const auto& tok = testing::toy().tokenizer();
  auto t = tok.tokenize("What color is the bus?");
  CHECK(t.words == std::vector<std::string>{"what", "color", "is", "the", "bus", "?"});
  CHECK(t.informative == std::vector<std::size_t>{1, 4});
  CHECK(t.token_ids.size() == t.words.size());
  CHECK(tok.vocab().word(t.token_ids[4]) == "bus");
}

TEST_CASE("empty text gives an empty sequence") {
  auto t = testing::toy().tokenizer().tokenize("");
  CHECK(t.words.empty());
  CHECK(t.token_ids.empty());
  CHECK(t.informative.empty());
}

TEST_CASE("informative positions are never stop words") {
  const auto& tok = testing::toy().tokenizer();
  std::ifstream in(TRANSVQA_FIXTURES "/corpus.txt");
  std::string line;
  while (std::getline(in, line)) {
    auto t = tok.tokenize(line);
    for (auto i : t.informative) {
      REQUIRE(i < t.size());
      CHECK_FALSE(is_stop_word(t.words[i]));
      CHECK(is_alphabetic_word(t.words[i]));
    }
  }
}

TEST_CASE("round trip over the corpus") {
  const auto& tok = testing::toy().tokenizer();
  std::ifstream in(TRANSVQA_FIXTURES "/corpus.txt");
  REQUIRE(in);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    CHECK(tok.detokenize(tok.tokenize(line)) == normalize_text(line));
    ++n;
  }
  CHECK(n == 50);
}

TEST_CASE("unknown words map to [UNK] and specials are recognised") {
  const auto& v = testing::toy().tokenizer().vocab();
  CHECK(v.id("zebra") == v.unk_id());
  CHECK(v.is_special(v.mask_id()));
  CHECK(v.is_special(v.cls_id()));
  CHECK_FALSE(v.is_special(v.id("bus")));
  CHECK(v.size() > 100);
}

TEST_CASE("with_word keeps ids in sync") {
  const auto& tok = testing::toy().tokenizer();
  auto t = tok.tokenize("what color is the bus?");
  auto u = tok.with_word(t, 4, "coach");
  CHECK(u.words[4] == "coach");
  CHECK(u.token_ids[4] == tok.vocab().id("coach"));
  CHECK(u.informative == t.informative);
  CHECK_THROWS_AS(tok.with_word(t, 6, "coach"), Error);
}

TEST_CASE("stop word list") {
  CHECK(stop_words().size() == 179);
  CHECK(is_stop_word("the"));
  CHECK(is_stop_word("what"));
  CHECK_FALSE(is_stop_word("bus"));
  CHECK(is_alphabetic_word("what's"));
  CHECK_FALSE(is_alphabetic_word("?"));
  CHECK_FALSE(is_alphabetic_word("b4"));
}
