#include "transvqa/orchestrator.hpp"

#include "transvqa/image_attack.hpp"

#include <cmath>
#include <sstream>

namespace transvqa {

int trigger_stride(int max_iters, std::size_t w_count) {
  if (max_iters < 1) throw Error("max_iters must be >= 1");
  return static_cast<int>(static_cast<std::size_t>(max_iters) / (w_count + 1));
}

bool should_trigger_joint(int m, int max_iters, std::size_t w_count) {
  if (m < 1 || m > max_iters) throw Error("iteration index outside [1, M]");
  int stride = trigger_stride(max_iters, w_count);
  return stride == 0 || m % stride == 0;
}

std::vector<int> trigger_schedule(int max_iters, std::size_t w_count) {
  trigger_stride(max_iters, w_count);
  std::vector<int> out;
  for (int m = 1; m <= max_iters; ++m) {
    if (should_trigger_joint(m, max_iters, w_count)) out.push_back(m);
  }
  return out;
}

InitialState initialize(const ImageTensor& clean_image, const TokenizedText& clean_text,
                        const AttackConfig& config, Rng& rng, const VisionLanguageModel& model) {
  InitialState s;
  ImageTensor noisy = clean_image;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    double delta = config.init_noise == InitNoise::kSymmetricBudget
                       ? rng.uniform(-config.image_budget, config.image_budget)
                       : rng.uniform();
    noisy[i] += delta;
  }
  s.image = clip_to_budget(noisy, clean_image, config.image_budget);
  s.text = clean_text;
  if (model.capabilities().mlm_head) {
    s.candidates = build_candidates(clean_text, config.top_k, model, clean_image);
  }
  return s;
}

namespace {

bool all_finite(const ImageTensor& t) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

class Runner {
 public:
  Runner(const ImageTensor& clean_image, const TokenizedText& clean_text, const AnswerSet& answers,
         const AttackEnvironment& env, const AttackConfig& config)
      : clean_image_(clean_image),
        clean_text_(clean_text),
        answers_(answers),
        env_(env),
        cfg_(config),
        rng_(config.seed) {
    cfg_.validate();
    const auto caps = env_.model.capabilities();
    if (!cfg_.loss_flags.empty() && !caps.differentiable) {
      throw Error("model '" + env_.model.name() + "' is not differentiable but losses " +
                  format_loss_flags(cfg_.loss_flags) + " are enabled");
    }
    if (cfg_.has(LossFlag::kFeatureImage)) feature_encoders_.insert(Encoder::kImage);
    if (cfg_.has(LossFlag::kFeatureMultimodal)) feature_encoders_.insert(Encoder::kMultimodal);
    anti_recovery_ = cfg_.has(LossFlag::kAntiRecovery);
    if (anti_recovery_ && !caps.mlm_head) {
      anti_recovery_ = false;
      trace_.notes.push_back("anti-recovery disabled: model has no MLM head");
    }
    joint_ = cfg_.has(LossFlag::kFeatureText);
    substitute_ = joint_;
    if (substitute_ && !(caps.mlm_head && caps.contextual_embeddings)) {
      substitute_ = false;
      trace_.notes.push_back(
          "synonym substitution disabled: model lacks an MLM head or contextual embeddings");
    }
  }

  AttackResult run(AttackDetails* details) {
    details_ = details;
    const auto& model = env_.model;
    clean_features_ = model.forward_features(clean_image_, clean_text_);
    auto init = initialize(clean_image_, clean_text_, cfg_, rng_, model);
    adv_ = init.image;
    text_ = init.text;
    candidates_ = std::move(init.candidates);
    if (details) {
      details->initial_image = adv_;
      details->candidates = candidates_;
    }
    const std::size_t w_count = clean_text_.informative.size();

    for (int m = 1; m <= cfg_.max_iters; ++m) {
      IterationRecord rec;
      rec.iter = m;

      if (!feature_encoders_.empty()) {
        auto g = gradient(LossSpec::feature(clean_features_, feature_encoders_), rec, "feature");
        rec.loss_feature = g.loss;
        step(g.image, rec);
      }

      if (anti_recovery_) {
        bool rebuilt = false;
        const auto& build = cache_.get(text_, answers_, model.tokenizer(), env_.client,
                                       env_.prompt_template, &rebuilt);
        if (rebuilt) {
          for (const auto& w : build.warnings) rec.notes.push_back(w);
        }
        std::vector<std::string> warnings;
        auto templates = scorable_templates(build.templates, model.tokenizer().vocab(),
                                            rebuilt ? &warnings : nullptr);
        for (auto& w : warnings) rec.notes.push_back(std::move(w));
        if (templates.empty()) {
          rec.notes.push_back("anti-recovery step skipped: no scorable template");
        } else {
          auto g = gradient(LossSpec::anti_recovery(templates), rec, "anti-recovery");
          rec.loss_anti_recovery = g.loss;
          step(g.image, rec);
          if (details) details->last_templates = templates;
        }
      }

      rec.joint_triggered = should_trigger_joint(m, cfg_.max_iters, w_count);
      if (rec.joint_triggered && joint_) {
        rec.joint_ran = true;
        auto encoders = feature_encoders_;
        encoders.insert(Encoder::kText);
        auto g = gradient(LossSpec::feature(clean_features_, encoders), rec, "cross-modal");
        rec.loss_cross = g.loss;
        step(g.image, rec);
        if (substitute_ && !candidates_.positions.empty()) substitute(g, rec);
      }

      trace_.records.push_back(std::move(rec));
    }

    AttackResult result;
    result.adv_image = adv_;
    result.adv_text = text_;
    result.linf = linf_distance(adv_, clean_image_);
    for (std::size_t i = 0; i < text_.size(); ++i) {
      if (text_.words[i] != clean_text_.words[i]) ++result.n_substitutions;
    }
    result.semantic_sim =
        result.n_substitutions == 0 ? 1.0 : semantic_similarity(text_, clean_text_, env_.encoder);
    result.trace = std::move(trace_);
    return result;
  }

 private:
  LossGradients gradient(const LossSpec& spec, IterationRecord& rec, const char* what) {
    auto transform = DiversityTransform::sample(adv_.shape(), cfg_.diversity_prob, rng_);
    auto g = env_.model.loss_and_gradients(spec, transform.apply(adv_), text_);
    if (g.degenerate_terms > 0) {
      rec.notes.push_back(std::string(what) + " loss: " + std::to_string(g.degenerate_terms) +
                          " zero-norm token pairs contributed 0");
    }
    if (!std::isfinite(g.loss) || !all_finite(g.image)) {
      trace_.records.push_back(rec);
      throw AttackAborted(std::string("non-finite ") + what + " loss or gradient at iteration " +
                              std::to_string(rec.iter),
                          trace_);
    }
    g.image = transform.adjoint(g.image);
    return g;
  }

  void step(const ImageTensor& grad, IterationRecord& rec) {
    adv_ = image_step(adv_, grad, cfg_.step_size, clean_image_, cfg_.image_budget, cfg_.direction);
    if (!within_budget(adv_, clean_image_, cfg_.image_budget) || !adv_.in_unit_range()) {
      throw Error("image constraint violated after an update");
    }
    rec.linf_after_step.push_back(linf_distance(adv_, clean_image_));
    if (details_ && details_->on_image_update) details_->on_image_update(rec.iter, adv_);
  }

  void substitute(const LossGradients& g, IterationRecord& rec) {
    const auto& model = env_.model;
    std::map<std::size_t, std::vector<double>> targets;
    for (const auto& pc : candidates_.positions) {
      if (pc.position >= g.word_embeddings.size()) continue;
      targets[pc.position] = estimate_target_embedding(model.word_embedding(text_, pc.position),
                                                       g.word_embeddings[pc.position]);
    }
    auto embedded = embed_candidates(candidates_, text_, model);
    auto ranking = rank_synonyms(targets, embedded);
    for (auto& w : ranking.warnings) rec.notes.push_back(std::move(w));
    auto outcome = substitute_with_constraint(text_, clean_text_, embedded, ranking.order,
                                              cfg_.text_sim_threshold, env_.encoder,
                                              model.tokenizer());
    rec.substitutions = outcome.substitutions;
    text_ = std::move(outcome.text);
  }

  const ImageTensor& clean_image_;
  const TokenizedText& clean_text_;
  const AnswerSet& answers_;
  const AttackEnvironment& env_;
  AttackConfig cfg_;
  Rng rng_;

  std::set<Encoder> feature_encoders_;
  bool anti_recovery_ = false;
  bool joint_ = false;
  bool substitute_ = false;

  LayerFeatures clean_features_;
  ImageTensor adv_;
  TokenizedText text_;
  CandidateSet candidates_;
  TemplateCache cache_;
  AttackTrace trace_;
  AttackDetails* details_ = nullptr;
};

}  // namespace

AttackResult run_attack(const ImageTensor& clean_image, const TokenizedText& clean_text,
                        const AnswerSet& answers, const AttackEnvironment& env,
                        const AttackConfig& config, AttackDetails* details) {
  Runner runner(clean_image, clean_text, answers, env, config);
  return runner.run(details);
}

}  // namespace transvqa
