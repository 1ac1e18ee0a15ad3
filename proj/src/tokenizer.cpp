#include "transvqa/tokenizer.hpp"

#include <algorithm>
#include <cctype>

namespace transvqa {

namespace {

bool is_word_char(unsigned char ch) { return std::isalnum(ch) || ch >= 0x80; }


bool no_space_before(const std::string& w) {
  return w == "?" || w == "." || w == "," || w == "!" || w == ";" || w == ":" || w == ")";
}

}  // namespace

bool is_alphabetic_word(std::string_view word) {
  if (word.empty()) return false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    auto ch = static_cast<unsigned char>(word[i]);
    if (std::isalpha(ch)) continue;
    if (ch == '\'' && i > 0 && i + 1 < word.size()) continue;
    return false;
  }
  return true;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      pending_space = !out.empty();
      continue;
    }
    const std::string token(1, static_cast<char>(ch));
    if (pending_space && !no_space_before(token) && out.back() != '(') out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(ch)));
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> words) {
  for (auto special : {kPad, kUnk, kMask, kCls}) {
    if (std::find(words.begin(), words.end(), special) == words.end()) {
      words_.emplace_back(special);
    }
  }
  for (auto& w : words) words_.push_back(std::move(w));
  for (int i = 0; i < static_cast<int>(words_.size()); ++i) {
    if (!index_.emplace(words_[i], i).second) throw Error("duplicate vocabulary entry " + words_[i]);
  }
  pad_ = index_.at(std::string(kPad));
  unk_ = index_.at(std::string(kUnk));
  mask_ = index_.at(std::string(kMask));
  cls_ = index_.at(std::string(kCls));
}

int Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? unk_ : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.count(std::string(word)) != 0;
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || id >= size()) throw Error("token id " + std::to_string(id) + " out of range");
  return words_[id];
}

std::vector<std::string> Tokenizer::split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    auto ch = static_cast<unsigned char>(text[i]);
    if (std::isspace(ch)) {
      ++i;
      continue;
    }
    if (!is_word_char(ch)) {
      out.emplace_back(1, static_cast<char>(ch));
      ++i;
      continue;
    }
    std::string word;
    while (i < text.size()) {
      auto c = static_cast<unsigned char>(text[i]);
      if (is_word_char(c)) {
        word.push_back(static_cast<char>(std::tolower(c)));
        ++i;
      } else if (c == '\'' && i + 1 < text.size() &&
                 is_word_char(static_cast<unsigned char>(text[i + 1]))) {
        word.push_back('\'');
        ++i;
      } else {
        break;
      }
    }
    out.push_back(std::move(word));
  }
  return out;
}

std::string Tokenizer::join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty() && !no_space_before(w) && out.back() != '(') out.push_back(' ');
    out += w;
  }
  return out;
}

TokenizedText Tokenizer::tokenize(std::string_view text) const {
  TokenizedText t;
  t.words = split_words(text);
  for (std::size_t i = 0; i < t.words.size(); ++i) {
    t.token_ids.push_back(vocab_.id(t.words[i]));
    if (is_alphabetic_word(t.words[i]) && !is_stop_word(t.words[i])) t.informative.push_back(i);
  }
  return t;
}

std::string Tokenizer::detokenize(const TokenizedText& text) const { return join_words(text.words); }

TokenizedText Tokenizer::with_word(const TokenizedText& text, std::size_t position,
                                   const std::string& word) const {
  if (position >= text.size()) throw Error("substitution position out of range");
  TokenizedText out = text;
  out.words[position] = word;
  out.token_ids[position] = vocab_.id(word);
  return out;
}

}  // namespace transvqa
