#include "transvqa/toy_model.hpp"

#include "transvqa/autodiff.hpp"
#include "transvqa/llm_bridge.hpp"
#include "transvqa/rng.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace transvqa {

using Eigen::MatrixXd;

namespace {

constexpr int kLayersMultimodal = 2;

MatrixXd to_matrix(const StoredTensor& t) {
  if (t.shape.size() != 2) throw Error("toy weight tensors must be rank 2");
  MatrixXd m(t.shape[0], t.shape[1]);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.values[r * m.cols() + c];
  }
  return m;
}

std::vector<double> flatten(const MatrixXd& m) {
  std::vector<double> out;
  out.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

MatrixXd gaussian(Rng& rng, int rows, int cols, double stddev) {
  MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal() * stddev;
  }
  return m;
}

std::vector<std::string> vocabulary_words(const ToyLexicon& lex) {
  std::vector<std::string> words;
  for (const auto& e : lex.entries) words.push_back(e.word);
  return words;
}

}  // namespace

const ToyLexicon& ToyLexicon::instance() {
  static const ToyLexicon lex = [] {
    ToyLexicon l;
    const std::vector<std::vector<std::string>> clusters = {
        {"color", "colour", "hue", "shade"},
        {"bus", "coach", "shuttle"},
        {"car", "automobile", "vehicle"},
        {"room", "chamber"},
        {"man", "guy", "gentleman"},
        {"woman", "lady"},
        {"dog", "puppy", "hound"},
        {"cat", "kitten"},
        {"animal", "creature"},
        {"holding", "carrying", "gripping"},
        {"sport", "game"},
        {"playing", "practicing"},
        {"table", "desk", "counter"},
        {"picture", "photo", "image"},
        {"weather", "climate"},
        {"food", "meal", "dish"},
        {"person", "individual"},
        {"shirt", "top"},
        {"sky", "heavens"},
        {"wall", "partition"},
        {"train", "locomotive"},
        {"building", "structure"},
        {"eating", "consuming"},
        {"wearing", "donning"},
        {"kind", "sort", "type"},
        {"many", "numerous"},
        {"answer", "reply"},
        {"question", "query"},
        {"plate", "platter"},
        {"sitting", "seated"},
    };
    const std::vector<std::string> function_words = {
        "what", "which", "who", "where", "how", "is", "are", "the", "a",  "an", "this",
        "that", "there", "of",  "in",  "on",  "does", "do", "it", "to", "like",
        "?",    ".",     ",",   "'",   "!",
    };
    l.answers = {"red",   "blue",    "green",    "white",  "black",    "yellow",
                 "brown", "orange",  "yes",      "no",     "one",      "two",
                 "three", "four",    "kitchen",  "bedroom", "bathroom", "tennis",
                 "baseball", "pizza", "sunny",   "cloudy", "frisbee",  "giraffe"};
    for (const auto& w : function_words) l.entries.push_back({w, -1});
    int cluster = 0;
    for (const auto& c : clusters) {
      for (const auto& w : c) l.entries.push_back({w, cluster});
      ++cluster;
    }
    for (const auto& a : l.answers) l.entries.push_back({a, cluster++});
    return l;
  }();
  return lex;
}

int ToyLexicon::cluster_of(const std::string& word) const {
  for (const auto& e : entries) {
    if (e.word == word) return e.cluster;
  }
  return -1;
}

struct ToyModel::Weights {
  MatrixXd patch_w, patch_b, patch_pos;  // 48 x d, 1 x d, P x d
  MatrixXd img2_w, img2_b;
  MatrixXd tok_embed;                    // V x d
  MatrixXd text_w, text_ctx_w, text_b, text_pos;
  MatrixXd cls;
  MatrixXd mm_q[kLayersMultimodal], mm_k[kLayersMultimodal], mm_v[kLayersMultimodal];
  MatrixXd mm_o[kLayersMultimodal], mm_r[kLayersMultimodal], mm_b[kLayersMultimodal];
  MatrixXd mlm_w, mlm_b;                 // d x V, 1 x V

  std::vector<std::pair<std::string, MatrixXd*>> named() {
    std::vector<std::pair<std::string, MatrixXd*>> out = {
        {"patch_w", &patch_w},       {"patch_b", &patch_b}, {"patch_pos", &patch_pos},
        {"img2_w", &img2_w},         {"img2_b", &img2_b},   {"tok_embed", &tok_embed},
        {"text_w", &text_w},         {"text_ctx_w", &text_ctx_w},
        {"text_b", &text_b},         {"text_pos", &text_pos}, {"cls", &cls},
    };
    for (int l = 0; l < kLayersMultimodal; ++l) {
      auto p = "mm" + std::to_string(l) + "_";
      out.push_back({p + "q", &mm_q[l]});
      out.push_back({p + "k", &mm_k[l]});
      out.push_back({p + "v", &mm_v[l]});
      out.push_back({p + "o", &mm_o[l]});
      out.push_back({p + "r", &mm_r[l]});
      out.push_back({p + "b", &mm_b[l]});
    }
    out.push_back({"mlm_w", &mlm_w});
    out.push_back({"mlm_b", &mlm_b});
    return out;
  }
};

namespace {

constexpr int kPatches = (ToyModel::kImageSize / ToyModel::kPatch) *
                         (ToyModel::kImageSize / ToyModel::kPatch);
constexpr int kPatchDim = ToyModel::kPatch * ToyModel::kPatch * ToyModel::kChannels;

}  // namespace

// Forward graph on a tape. Text rows may be zero.
struct ToyModel::Graph {
  ad::Var patches, embeddings;
  std::vector<ad::Var> image, text, multimodal;
  ad::Var mlm_logits;
  int text_len = 0;
  bool has_text = false;

  Graph(ad::Tape& tape, const Weights& w, MatrixXd patch_values, MatrixXd embed_values) {
    using namespace ad;
    const int d = kDim;
    text_len = static_cast<int>(embed_values.rows());
    has_text = text_len > 0;
    patches = tape.leaf(std::move(patch_values));
    embeddings = tape.leaf(std::move(embed_values));

    auto c = [&](const MatrixXd& m) { return tape.constant(m); };

    Var h1 = ad::tanh(add_row(add(matmul(patches, c(w.patch_w)), c(w.patch_pos)), c(w.patch_b)));
    Var h2 = ad::tanh(add_row(matmul(h1, c(w.img2_w)), c(w.img2_b)));
    image = {h1, h2};

    std::vector<Var> tokens = {c(w.cls), h2};
    if (has_text) {
      Var ctx = matmul(mean_rows(embeddings), c(w.text_ctx_w));
      Var pre = add(matmul(embeddings, c(w.text_w)), c(w.text_pos.topRows(text_len)));
      Var t1 = ad::tanh(add_row(add_row(pre, ctx), c(w.text_b)));
      text = {t1};
      tokens.push_back(t1);
    }
    Var x = concat_rows(tokens);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    for (int l = 0; l < kLayersMultimodal; ++l) {
      Var q = matmul(x, c(w.mm_q[l]));
      Var k = matmul(x, c(w.mm_k[l]));
      Var v = matmul(x, c(w.mm_v[l]));
      Var attn = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_d));
      Var mixed = matmul(attn, v);
      x = ad::tanh(add_row(add(matmul(x, c(w.mm_r[l])), matmul(mixed, c(w.mm_o[l]))), c(w.mm_b[l])));
      multimodal.push_back(x);
    }
    if (has_text) {
      mlm_logits =
          add_row(matmul(slice_rows(x, 1 + kPatches, text_len), c(w.mlm_w)), c(w.mlm_b));
    }
  }

  LayerFeatures features(const ad::Tape& tape) const {
    LayerFeatures f;
    for (auto v : image) f.image.push_back(tape.value(v));
    for (auto v : text) f.text.push_back(tape.value(v));
    for (auto v : multimodal) f.multimodal.push_back(tape.value(v));
    return f;
  }
};

ToyModel::ToyModel(std::uint64_t seed, std::string name)
    : name_(std::move(name)),
      tokenizer_(Vocabulary(vocabulary_words(ToyLexicon::instance()))),
      answers_(ToyLexicon::instance().answers) {
  const auto& lex = ToyLexicon::instance();
  const int d = kDim;
  const int vocab = tokenizer_.vocab().size();
  Rng rng(seed);
  auto w = std::make_shared<Weights>();
  const double gain = 1.5;
  w->patch_w = gaussian(rng, kPatchDim, d, gain / std::sqrt(double(kPatchDim)));
  w->patch_b = gaussian(rng, 1, d, 0.5);
  w->patch_pos = gaussian(rng, kPatches, d, 0.5);
  w->img2_w = gaussian(rng, d, d, gain / std::sqrt(double(d)));
  w->img2_b = gaussian(rng, 1, d, 0.2);

  // Synonyms share a cluster centre so their embeddings are close.
  std::unordered_map<int, Eigen::RowVectorXd> centres;
  w->tok_embed = MatrixXd(vocab, d);
  for (int id = 0; id < vocab; ++id) {
    int cl = lex.cluster_of(tokenizer_.vocab().word(id));
    Eigen::RowVectorXd noise = gaussian(rng, 1, d, 1.0);
    if (cl < 0) {
      w->tok_embed.row(id) = noise;
      continue;
    }
    auto it = centres.find(cl);
    if (it == centres.end()) it = centres.emplace(cl, gaussian(rng, 1, d, 1.0)).first;
    w->tok_embed.row(id) = it->second + 0.35 * noise;
  }
  const double embed_scale = 1.0 / std::sqrt(double(d));
  w->text_w = gaussian(rng, d, d, gain * embed_scale);
  w->text_ctx_w = gaussian(rng, d, d, 0.7 * embed_scale);
  w->text_b = gaussian(rng, 1, d, 0.2);
  w->text_pos = gaussian(rng, kMaxText, d, 0.3);
  w->cls = gaussian(rng, 1, d, 1.0);
  for (int l = 0; l < kLayersMultimodal; ++l) {
    w->mm_q[l] = gaussian(rng, d, d, 2.0 / std::sqrt(double(d)));
    w->mm_k[l] = gaussian(rng, d, d, 2.0 / std::sqrt(double(d)));
    w->mm_v[l] = gaussian(rng, d, d, 1.0 / std::sqrt(double(d)));
    w->mm_o[l] = gaussian(rng, d, d, 2.5 / std::sqrt(double(d)));
    w->mm_r[l] = gaussian(rng, d, d, gain / std::sqrt(double(d)));
    w->mm_b[l] = gaussian(rng, 1, d, 0.2);
  }
  w->mlm_w = gaussian(rng, d, vocab, 2.0 / std::sqrt(double(d)));
  w->mlm_b = gaussian(rng, 1, vocab, 0.1);
  w_ = std::move(w);
}

ToyModel::ToyModel(std::shared_ptr<const Weights> weights, std::string name)
    : name_(std::move(name)),
      w_(std::move(weights)),
      tokenizer_(Vocabulary(vocabulary_words(ToyLexicon::instance()))),
      answers_(ToyLexicon::instance().answers) {}

ToyModel ToyModel::from_archive(const TensorArchive& archive, std::string name) {
  auto w = std::make_shared<Weights>();
  ToyModel reference(0);
  auto expected = std::const_pointer_cast<Weights>(reference.w_)->named();
  auto slots = w->named();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    *slots[i].second = to_matrix(archive.get(slots[i].first));
    const auto& want = *expected[i].second;
    if (slots[i].second->rows() != want.rows() || slots[i].second->cols() != want.cols()) {
      throw Error("toy weight '" + slots[i].first + "' has the wrong shape");
    }
  }
  return ToyModel(std::shared_ptr<const Weights>(std::move(w)), std::move(name));
}

TensorArchive ToyModel::to_archive() const {
  TensorArchive a;
  for (auto& [n, m] : std::const_pointer_cast<Weights>(w_)->named()) {
    a.put(n, {m->rows(), m->cols()}, flatten(*m));
  }
  return a;
}

Capabilities ToyModel::capabilities() const {
  Capabilities c;
  c.differentiable = true;
  c.mlm_head = true;
  c.contextual_embeddings = true;
  c.concurrent_inference = true;
  return c;
}

Shape ToyModel::image_shape() const {
  return Shape{kImageSize, kImageSize, kChannels};
}

void ToyModel::check_inputs(const ImageTensor& image, const TokenizedText& text) const {
  if (image.shape() != image_shape()) {
    throw Error("toy model expects a " + image_shape().str() + " image, got " +
                image.shape().str());
  }
  if (text.size() > kMaxText) {
    throw Error("text of " + std::to_string(text.size()) + " tokens exceeds the toy model limit of " +
                std::to_string(kMaxText));
  }
  if (text.token_ids.size() != text.words.size()) throw Error("token ids and words disagree");
}

MatrixXd ToyModel::patches(const ImageTensor& image) const {
  const int per_row = kImageSize / kPatch;
  MatrixXd p(kPatches, kPatchDim);
  for (int py = 0; py < per_row; ++py) {
    for (int px = 0; px < per_row; ++px) {
      int row = py * per_row + px;
      int col = 0;
      for (int y = 0; y < kPatch; ++y) {
        for (int x = 0; x < kPatch; ++x) {
          for (int c = 0; c < kChannels; ++c) {
            p(row, col++) = image.at(py * kPatch + y, px * kPatch + x, c);
          }
        }
      }
    }
  }
  return p;
}

ImageTensor ToyModel::unpatch(const MatrixXd& grad, const Shape& shape) const {
  const int per_row = kImageSize / kPatch;
  ImageTensor out(shape);
  for (int py = 0; py < per_row; ++py) {
    for (int px = 0; px < per_row; ++px) {
      int row = py * per_row + px;
      int col = 0;
      for (int y = 0; y < kPatch; ++y) {
        for (int x = 0; x < kPatch; ++x) {
          for (int c = 0; c < kChannels; ++c) {
            out.at(py * kPatch + y, px * kPatch + x, c) = grad(row, col++);
          }
        }
      }
    }
  }
  return out;
}

MatrixXd ToyModel::lookup(const TokenizedText& text) const {
  MatrixXd e(static_cast<Eigen::Index>(text.size()), kDim);
  for (std::size_t i = 0; i < text.size(); ++i) {
    int id = text.token_ids[i];
    if (id < 0 || id >= w_->tok_embed.rows()) throw Error("token id out of vocabulary range");
    e.row(static_cast<Eigen::Index>(i)) = w_->tok_embed.row(id);
  }
  return e;
}

LayerFeatures ToyModel::forward_features(const ImageTensor& image,
                                         const TokenizedText& text) const {
  check_inputs(image, text);
  ad::Tape tape;
  Graph g(tape, *w_, patches(image), lookup(text));
  return g.features(tape);
}

namespace {

struct LossOnTape {
  ad::Var value;
  int degenerate = 0;
};

LossOnTape feature_loss_on_tape(ad::Tape& tape, const std::vector<ad::Var>& image,
                                const std::vector<ad::Var>& text,
                                const std::vector<ad::Var>& multimodal, const FeatureLoss& spec) {
  if (!spec.clean) throw Error("feature loss without clean features");
  std::vector<ad::Var> terms;
  int degenerate = 0;
  auto add_family = [&](Encoder enc, const std::vector<ad::Var>& adv) {
    if (!spec.encoders.count(enc)) return;
    const auto& clean = spec.clean->of(enc);
    if (clean.size() != adv.size()) {
      throw Error("clean and adversarial " + to_string(enc) + " features have different depth");
    }
    for (std::size_t l = 0; l < adv.size(); ++l) {
      const auto& a = tape.value(adv[l]);
      if (clean[l].rows() != a.rows() || clean[l].cols() != a.cols()) {
        throw Error("clean and adversarial " + to_string(enc) +
                    " features differ in token count");
      }
      int skipped = 0;
      terms.push_back(ad::cosine_rows_sum(clean[l], adv[l], &skipped));
      degenerate += skipped;
    }
  };
  add_family(Encoder::kImage, image);
  add_family(Encoder::kText, text);
  add_family(Encoder::kMultimodal, multimodal);
  if (terms.empty()) terms.push_back(tape.constant(MatrixXd::Zero(1, 1)));
  return {ad::sum_scalars(terms), degenerate};
}

}  // namespace

LossGradients ToyModel::loss_and_gradients(const LossSpec& loss, const ImageTensor& image,
                                           const TokenizedText& text) const {
  check_inputs(image, text);
  LossGradients out;
  if (const auto* f = std::get_if<FeatureLoss>(&loss.term)) {
    ad::Tape tape;
    Graph g(tape, *w_, patches(image), lookup(text));
    auto l = feature_loss_on_tape(tape, g.image, g.text, g.multimodal, *f);
    auto total = ad::scale(l.value, loss.scale);
    tape.backward(total);
    out.loss = tape.value(total)(0, 0);
    out.degenerate_terms = l.degenerate;
    out.image = unpatch(tape.grad(g.patches), image.shape());
    const auto& ge = tape.grad(g.embeddings);
    for (Eigen::Index r = 0; r < ge.rows(); ++r) {
      std::vector<double> v(static_cast<std::size_t>(ge.cols()));
      for (Eigen::Index c = 0; c < ge.cols(); ++c) v[c] = ge(r, c);
      out.word_embeddings.push_back(std::move(v));
    }
    return out;
  }
  const auto& ar = std::get<AntiRecoveryLoss>(loss.term);
  if (!ar.templates || ar.templates->empty()) throw Error("anti-recovery loss without templates");
  out.image = ImageTensor(image.shape());
  for (const auto& tpl : *ar.templates) {
    check_inputs(image, tpl.text);
    if (tpl.mask_indices.empty()) throw Error("masked template without masked positions");
    ad::Tape tape;
    Graph g(tape, *w_, patches(image), lookup(tpl.text));
    std::vector<std::pair<int, int>> picks;
    for (auto pos : tpl.mask_indices) {
      if (pos >= tpl.text.size()) throw Error("mask index out of range");
      picks.emplace_back(static_cast<int>(pos), tpl.target_ids.at(pos));
    }
    auto total = ad::scale(ad::log_softmax_pick(g.mlm_logits, picks), loss.scale);
    tape.backward(total);
    out.loss += tape.value(total)(0, 0);
    auto gi = unpatch(tape.grad(g.patches), image.shape());
    for (std::size_t i = 0; i < gi.size(); ++i) out.image[i] += gi[i];
  }
  return out;
}

double ToyModel::loss_at_embeddings(const LossSpec& loss, const ImageTensor& image,
                                    const TokenizedText& text,
                                    const Eigen::MatrixXd& embeddings) const {
  check_inputs(image, text);
  const auto* f = std::get_if<FeatureLoss>(&loss.term);
  if (!f) throw Error("loss_at_embeddings supports feature losses only");
  if (embeddings.rows() != static_cast<Eigen::Index>(text.size()) || embeddings.cols() != kDim) {
    throw Error("embedding matrix does not match the text");
  }
  ad::Tape tape;
  Graph g(tape, *w_, patches(image), embeddings);
  auto l = feature_loss_on_tape(tape, g.image, g.text, g.multimodal, *f);
  return tape.value(l.value)(0, 0) * loss.scale;
}

double ToyModel::loss_value(const LossSpec& loss, const ImageTensor& image,
                            const TokenizedText& text) const {
  check_inputs(image, text);
  if (std::holds_alternative<FeatureLoss>(loss.term)) {
    return loss_at_embeddings(loss, image, text, lookup(text));
  }
  const auto& ar = std::get<AntiRecoveryLoss>(loss.term);
  if (!ar.templates || ar.templates->empty()) throw Error("anti-recovery loss without templates");
  double total = 0.0;
  for (const auto& tpl : *ar.templates) {
    auto dist = mlm_probabilities(tpl, image);
    for (std::size_t k = 0; k < dist.positions.size(); ++k) {
      total += std::log(dist.probs[k][tpl.target_ids.at(dist.positions[k])]);
    }
  }
  return total * loss.scale;
}

MlmDistribution ToyModel::mlm_probabilities(const TokenizedText& masked_text,
                                            const std::vector<std::size_t>& positions,
                                            const ImageTensor& image) const {
  check_inputs(image, masked_text);
  if (positions.empty()) throw Error("mlm_probabilities needs at least one masked position");
  for (auto p : positions) {
    if (p >= masked_text.size()) {
      throw Error("mask index " + std::to_string(p) + " out of range for " +
                  std::to_string(masked_text.size()) + " tokens");
    }
  }
  ad::Tape tape;
  Graph g(tape, *w_, patches(image), lookup(masked_text));
  const auto& logits = tape.value(g.mlm_logits);
  MlmDistribution out;
  for (auto p : positions) {
    Eigen::RowVectorXd row = logits.row(static_cast<Eigen::Index>(p));
    Eigen::RowVectorXd e = (row.array() - row.maxCoeff()).exp().matrix();
    e /= e.sum();
    out.positions.push_back(p);
    out.probs.emplace_back(e.data(), e.data() + e.size());
  }
  return out;
}

std::vector<double> ToyModel::word_embedding(const TokenizedText& text,
                                             std::size_t position) const {
  if (position >= text.size()) throw Error("word position out of range");
  int id = text.token_ids[position];
  Eigen::RowVectorXd row = w_->tok_embed.row(id);
  return {row.data(), row.data() + row.size()};
}

std::vector<double> ToyModel::contextual_embedding(const TokenizedText& text,
                                                   std::size_t position) const {
  if (position >= text.size()) throw Error("word position out of range");
  if (text.size() > kMaxText) throw Error("text exceeds the toy model limit");
  // The text encoder does not read the image, so any image will do.
  static const ImageTensor blank(Shape{kImageSize, kImageSize, kChannels}, 0.0);
  ad::Tape tape;
  Graph g(tape, *w_, patches(blank), lookup(text));
  Eigen::RowVectorXd row = tape.value(g.text[0]).row(static_cast<Eigen::Index>(position));
  return {row.data(), row.data() + row.size()};
}

TokenizedText ToyModel::answer_prompt(const std::string& question) const {
  auto prompt = tokenizer_.tokenize(fallback_sentence(normalize_text(question), "x"));
  const std::size_t slot = prompt.size() - 1;
  prompt.words[slot] = std::string(Vocabulary::kMask);
  prompt.token_ids[slot] = tokenizer_.vocab().mask_id();
  return prompt;
}

std::vector<double> ToyModel::answer_logits(const ImageTensor& image,
                                            const std::string& question) const {
  auto prompt = answer_prompt(question);
  auto dist = mlm_probabilities(prompt, {prompt.size() - 1}, image);
  std::vector<double> out;
  out.reserve(answers_.size());
  for (const auto& a : answers_) out.push_back(std::log(dist.probs[0][tokenizer_.vocab().id(a)]));
  return out;
}

std::string ToyModel::predict(const ImageTensor& image, const std::string& question) const {
  auto logits = answer_logits(image, question);
  auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
  return answers_[static_cast<std::size_t>(best)];
}

ImageTensor ToyModel::random_image(std::uint64_t seed) {
  // Base colour, a linear gradient, two solid rectangles and mild noise, so
  // images differ in their global statistics and not only in texture.
  Rng rng(seed);
  ImageTensor img(Shape{kImageSize, kImageSize, kChannels});
  double base[kChannels], slope[kChannels][2];
  for (int c = 0; c < kChannels; ++c) {
    base[c] = rng.uniform(0.1, 0.9);
    slope[c][0] = rng.uniform(-0.3, 0.3);
    slope[c][1] = rng.uniform(-0.3, 0.3);
  }
  for (int y = 0; y < kImageSize; ++y) {
    for (int x = 0; x < kImageSize; ++x) {
      double fy = y / double(kImageSize - 1) - 0.5, fx = x / double(kImageSize - 1) - 0.5;
      for (int c = 0; c < kChannels; ++c) {
        img.at(y, x, c) = base[c] + slope[c][0] * fy + slope[c][1] * fx;
      }
    }
  }
  for (int r = 0; r < 2; ++r) {
    auto y0 = rng.below(kImageSize - 4), x0 = rng.below(kImageSize - 4);
    auto h = 3 + rng.below(kImageSize - y0 - 3), w = 3 + rng.below(kImageSize - x0 - 3);
    double colour[kChannels];
    for (auto& v : colour) v = rng.uniform();
    for (auto y = y0; y < y0 + h; ++y) {
      for (auto x = x0; x < x0 + w; ++x) {
        for (int c = 0; c < kChannels; ++c) img.at(y, x, c) = colour[c];
      }
    }
  }
  for (auto& v : img.data()) v = std::clamp(v + rng.uniform(-0.05, 0.05), 0.0, 1.0);
  return img;
}

}  // namespace transvqa
