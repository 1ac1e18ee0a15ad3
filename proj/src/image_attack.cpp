#include "transvqa/image_attack.hpp"

#include <cmath>

namespace transvqa {

double feature_loss(const LayerFeatures& clean, const LayerFeatures& adv,
                    const std::set<Encoder>& encoders, int* degenerate) {
  double total = 0.0;
  int skipped = 0;
  for (auto enc : encoders) {
    const auto& c = clean.of(enc);
    const auto& a = adv.of(enc);
    if (c.size() != a.size()) {
      throw Error(to_string(enc) + " features: " + std::to_string(c.size()) + " vs " +
                  std::to_string(a.size()) + " layers");
    }
    for (std::size_t l = 0; l < c.size(); ++l) {
      if (c[l].rows() != a[l].rows() || c[l].cols() != a[l].cols()) {
        throw Error(to_string(enc) + " features: token shape mismatch at layer " +
                    std::to_string(l));
      }
      for (Eigen::Index j = 0; j < c[l].rows(); ++j) {
        double nc = c[l].row(j).squaredNorm();
        double na = a[l].row(j).squaredNorm();
        if (nc == 0.0 || na == 0.0) {
          ++skipped;
          continue;
        }
        total += c[l].row(j).dot(a[l].row(j)) / std::sqrt(nc * na);
      }
    }
  }
  if (degenerate) *degenerate = skipped;
  return total;
}

std::vector<MaskedTemplate> scorable_templates(const std::vector<MaskedTemplate>& templates,
                                               const Vocabulary& vocab,
                                               std::vector<std::string>* warnings) {
  std::vector<MaskedTemplate> out;
  for (const auto& t : templates) {
    bool ok = !t.mask_indices.empty();
    for (auto pos : t.mask_indices) {
      auto it = t.target_ids.find(pos);
      if (it == t.target_ids.end() || it->second < 0 || it->second >= vocab.size() ||
          vocab.is_special(it->second)) {
        ok = false;
      }
    }
    if (ok) {
      out.push_back(t);
    } else if (warnings) {
      warnings->push_back("answer '" + t.answer + "' skipped: token not in vocabulary");
    }
  }
  return out;
}

double anti_recovery_loss(const std::vector<MaskedTemplate>& templates, const ImageTensor& image,
                          const VisionLanguageModel& model, std::vector<std::string>* warnings) {
  if (templates.empty()) throw Error("anti-recovery loss needs at least one template");
  double total = 0.0;
  for (const auto& t : scorable_templates(templates, model.tokenizer().vocab(), warnings)) {
    auto dist = model.mlm_probabilities(t, image);
    for (std::size_t k = 0; k < dist.positions.size(); ++k) {
      total += std::log(dist.probs[k][t.target_ids.at(dist.positions[k])]);
    }
  }
  return total;
}

ImageTensor image_step(const ImageTensor& adv, const ImageTensor& grad, double step,
                       const ImageTensor& clean, double budget, StepDirection direction) {
  if (adv.shape() != grad.shape()) {
    throw Error("gradient shape " + grad.shape().str() + " does not match image " +
                adv.shape().str());
  }
  const double s = direction == StepDirection::kMinimize ? -step : step;
  ImageTensor moved = adv;
  for (std::size_t i = 0; i < moved.size(); ++i) {
    double g = grad[i];
    if (g > 0.0) moved[i] += s;
    else if (g < 0.0) moved[i] -= s;
  }
  return clip_to_budget(moved, clean, budget);
}

DiversityTransform DiversityTransform::identity(const Shape& shape) {
  DiversityTransform t;
  t.shape_ = shape;
  t.new_h_ = shape.height;
  t.new_w_ = shape.width;
  return t;
}

DiversityTransform DiversityTransform::sample(const Shape& shape, double prob, Rng& rng) {
  if (!(prob >= 0.0 && prob <= 1.0)) throw Error("diversity probability must lie in [0,1]");
  DiversityTransform t = identity(shape);
  // Always draw the coin so the stream does not depend on prob.
  double coin = rng.uniform();
  if (!(coin < prob)) return t;
  auto pick = [&](std::size_t n) {
    auto lo = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n)));
    return lo + static_cast<std::size_t>(rng.below(n - lo + 1));
  };
  t.active_ = true;
  t.new_h_ = pick(shape.height);
  t.new_w_ = pick(shape.width);
  t.top_ = static_cast<std::size_t>(rng.below(shape.height - t.new_h_ + 1));
  t.left_ = static_cast<std::size_t>(rng.below(shape.width - t.new_w_ + 1));
  return t;
}

ImageTensor DiversityTransform::apply(const ImageTensor& image) const {
  if (image.shape() != shape_) throw Error("diversity transform applied to a different shape");
  if (!active_) return image;
  ImageTensor out(shape_, 0.0);
  for (std::size_t y = 0; y < new_h_; ++y) {
    std::size_t sy = y * shape_.height / new_h_;
    for (std::size_t x = 0; x < new_w_; ++x) {
      std::size_t sx = x * shape_.width / new_w_;
      for (std::size_t c = 0; c < shape_.channels; ++c) {
        out.at(top_ + y, left_ + x, c) = image.at(sy, sx, c);
      }
    }
  }
  return out;
}

ImageTensor DiversityTransform::adjoint(const ImageTensor& grad) const {
  if (grad.shape() != shape_) throw Error("diversity adjoint applied to a different shape");
  if (!active_) return grad;
  ImageTensor out(shape_, 0.0);
  for (std::size_t y = 0; y < new_h_; ++y) {
    std::size_t sy = y * shape_.height / new_h_;
    for (std::size_t x = 0; x < new_w_; ++x) {
      std::size_t sx = x * shape_.width / new_w_;
      for (std::size_t c = 0; c < shape_.channels; ++c) {
        out.at(sy, sx, c) += grad.at(top_ + y, left_ + x, c);
      }
    }
  }
  return out;
}

ImageTensor diversity_transform(const ImageTensor& image, double prob, Rng& rng) {
  return DiversityTransform::sample(image.shape(), prob, rng).apply(image);
}

}  // namespace transvqa
