#pragma once

#include "transvqa/core.hpp"
#include "transvqa/model_adapter.hpp"
#include "transvqa/rng.hpp"

#include <set>
#include <string>
#include <vector>

namespace transvqa {

/// Sum over the selected encoders, layers and tokens of the cosine between
/// clean and adversarial token vectors. Zero-norm pairs add 0 and are
/// counted in `degenerate`.
double feature_loss(const LayerFeatures& clean, const LayerFeatures& adv,
                    const std::set<Encoder>& encoders, int* degenerate = nullptr);

/// Sum over templates and masked positions of log p(correct token) under the
/// adapter's MLM head. Templates whose targets are out of vocabulary are
/// skipped and reported through `warnings`.
double anti_recovery_loss(const std::vector<MaskedTemplate>& templates, const ImageTensor& image,
                          const VisionLanguageModel& model,
                          std::vector<std::string>* warnings = nullptr);

/// Templates the MLM head can score (every target id is a real vocabulary
/// entry). Dropped answers are reported through `warnings`.
std::vector<MaskedTemplate> scorable_templates(const std::vector<MaskedTemplate>& templates,
                                               const Vocabulary& vocab,
                                               std::vector<std::string>* warnings = nullptr);

/// clip(adv -/+ step * sign(grad)); minus when minimizing. sign(0) = 0.
ImageTensor image_step(const ImageTensor& adv, const ImageTensor& grad, double step,
                       const ImageTensor& clean, double budget, StepDirection direction);

/// Random resize of each spatial dimension to [0.9, 1.0] of its size
/// (nearest neighbour), zero-padded back to the input shape at a random
/// offset. Linear in the pixels, so gradients pull back through `adjoint`.
class DiversityTransform {
 public:
  static DiversityTransform identity(const Shape& shape);
  static DiversityTransform sample(const Shape& shape, double prob, Rng& rng);

  bool active() const { return active_; }
  ImageTensor apply(const ImageTensor& image) const;
  /// Transpose of `apply`: maps a gradient on the transformed image back to
  /// the input pixels.
  ImageTensor adjoint(const ImageTensor& grad) const;

  std::size_t resized_height() const { return new_h_; }
  std::size_t resized_width() const { return new_w_; }
  std::size_t top() const { return top_; }
  std::size_t left() const { return left_; }

 private:
  Shape shape_;
  bool active_ = false;
  std::size_t new_h_ = 0, new_w_ = 0, top_ = 0, left_ = 0;
};

ImageTensor diversity_transform(const ImageTensor& image, double prob, Rng& rng);

}  // namespace transvqa
