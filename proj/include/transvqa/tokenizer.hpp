#pragma once

#include "transvqa/core.hpp"

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace transvqa {

/// English stop words (the NLTK list, vendored so W is reproducible).
bool is_stop_word(std::string_view lower_word);
const std::vector<std::string>& stop_words();

/// Letters only, optionally with internal apostrophes ("what's").
bool is_alphabetic_word(std::string_view word);

/// Lowercase, single spaces, none before closing punctuation or after "(".
std::string normalize_text(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr std::string_view kMask = "[MASK]";
  static constexpr std::string_view kCls = "[CLS]";

  /// Specials are prepended when absent.
  explicit Vocabulary(std::vector<std::string> words);

  int id(std::string_view word) const;  // kUnk id when absent
  bool contains(std::string_view word) const;
  const std::string& word(int id) const;
  int size() const { return static_cast<int>(words_.size()); }

  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  int mask_id() const { return mask_; }
  int cls_id() const { return cls_; }
  bool is_special(int id) const { return id == pad_ || id == unk_ || id == mask_ || id == cls_; }

  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
  int pad_ = 0, unk_ = 1, mask_ = 2, cls_ = 3;
};

class Tokenizer {
 public:
  explicit Tokenizer(Vocabulary vocab) : vocab_(std::move(vocab)) {}

  /// Lowercased word/punctuation split; informative positions are the
  /// alphabetic non-stop-words.
  TokenizedText tokenize(std::string_view text) const;
  std::string detokenize(const TokenizedText& text) const;

  /// Word split only, no vocabulary lookup.
  static std::vector<std::string> split_words(std::string_view text);
  static std::string join_words(const std::vector<std::string>& words);

  /// Replaces the word at `position`, keeping token id in sync.
  TokenizedText with_word(const TokenizedText& text, std::size_t position,
                          const std::string& word) const;

  const Vocabulary& vocab() const { return vocab_; }

 private:
  Vocabulary vocab_;
};

}  // namespace transvqa
