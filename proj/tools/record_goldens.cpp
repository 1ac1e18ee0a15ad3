// Records snapshot values of the toy model for the regression tests and
// writes its weights as a tensor archive. Rerun after any deliberate change
// to the toy model, then review the diff.
#include "transvqa/image_attack.hpp"
#include "transvqa/llm_bridge.hpp"
#include "transvqa/orchestrator.hpp"
#include "transvqa/sentence_encoder.hpp"
#include "transvqa/text_attack.hpp"
#include "transvqa/toy_model.hpp"

#include "json.hpp"

#include <fstream>
#include <iostream>

using namespace transvqa;
using nlohmann::json;

namespace {

json matrices(const std::vector<Eigen::MatrixXd>& ms) {
  json out = json::array();
  for (const auto& m : ms) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<double> row(m.cols());
      for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
      rows.push_back(row);
    }
    out.push_back(rows);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: record_goldens <goldens.json> <weights.tvqa>\n";
    return 2;
  }
  ToyModel model;
  const auto& tok = model.tokenizer();
  auto image = ToyModel::random_image(42);
  auto text = tok.tokenize("what color is the bus?");
  json g;

  auto feats = model.forward_features(image, text);
  g["forward"] = {{"image", matrices(feats.image)},
                  {"text", matrices(feats.text)},
                  {"multimodal", matrices(feats.multimodal)}};

  auto masked = tok.with_word(text, 4, std::string(Vocabulary::kMask));
  g["mlm"] = model.mlm_probabilities(masked, {4}, image).probs[0];

  Rng rng(3);
  ImageTensor adv = image;
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += (rng.uniform() < 0.5 ? -8.0 : 8.0) / 255.0;
  adv = clip_to_budget(adv, image, 16.0 / 255.0);
  auto adv_feats = model.forward_features(adv, text);
  g["feature_loss"] = {
      {"image_multimodal",
       feature_loss(feats, adv_feats, {Encoder::kImage, Encoder::kMultimodal})},
      {"all", feature_loss(feats, adv_feats, {Encoder::kImage, Encoder::kMultimodal, Encoder::kText})}};

  OfflineLlmClient offline;
  auto build = build_masked_templates(text, AnswerSet({"red", "blue"}), tok, offline,
                                      default_prompt_template());
  g["anti_recovery"] = anti_recovery_loss(build.templates, image, model);

  Rng dim_rng(5);
  auto tf = DiversityTransform::sample(image.shape(), 1.0, dim_rng);
  g["dim"] = {{"height", tf.resized_height()},
              {"width", tf.resized_width()},
              {"top", tf.top()},
              {"left", tf.left()},
              {"pixels", tf.apply(image).data()}};

  auto cands = build_candidates(text, 3, model, image);
  json cj = json::object();
  for (const auto& pc : cands.positions) {
    std::vector<std::string> words;
    for (const auto& c : pc.candidates) words.push_back(c.word);
    cj[std::to_string(pc.position)] = words;
  }
  g["candidates"] = cj;

  LexiconSentenceEncoder encoder;
  AttackEnvironment env{model, encoder, offline};
  AttackConfig cfg;
  cfg.seed = 9;
  auto res = run_attack(image, text, AnswerSet({"red"}), env, cfg);
  json iters = json::array();
  for (const auto& r : res.trace.records) {
    json subs = json::array();
    for (const auto& s : r.substitutions) subs.push_back({s.position, s.old_word, s.new_word});
    iters.push_back({{"loss_feature", r.loss_feature.value_or(0.0)},
                     {"loss_anti_recovery", r.loss_anti_recovery.value_or(0.0)},
                     {"loss_cross", r.loss_cross ? json(*r.loss_cross) : json(nullptr)},
                     {"substitutions", subs}});
  }
  g["attack"] = {{"iterations", iters},
                 {"adv_words", res.adv_text.words},
                 {"linf", res.linf},
                 {"semantic_sim", res.semantic_sim}};

  std::ofstream out(argv[1]);
  out << g.dump(1) << "\n";
  model.to_archive().save(argv[2]);
  return 0;
}
