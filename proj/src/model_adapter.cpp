#include "transvqa/model_adapter.hpp"

namespace transvqa {

std::string to_string(Encoder encoder) {
  switch (encoder) {
    case Encoder::kImage: return "image";
    case Encoder::kText: return "text";
    case Encoder::kMultimodal: return "multimodal";
  }
  return "?";
}

const std::vector<Eigen::MatrixXd>& LayerFeatures::of(Encoder encoder) const {
  switch (encoder) {
    case Encoder::kImage: return image;
    case Encoder::kText: return text;
    case Encoder::kMultimodal: return multimodal;
  }
  return image;
}

bool LayerFeatures::all_finite() const {
  for (const auto* family : {&image, &text, &multimodal}) {
    for (const auto& m : *family) {
      if (!m.allFinite()) return false;
    }
  }
  return true;
}

MlmDistribution VisionLanguageModel::mlm_probabilities(const MaskedTemplate& masked,
                                                       const ImageTensor& image) const {
  if (masked.mask_indices.empty()) throw Error("masked template has no masked positions");
  return mlm_probabilities(masked.text, masked.mask_indices, image);
}

ImageTensor VisionLanguageModel::gradient_wrt_image(const LossSpec& loss, const ImageTensor& image,
                                                    const TokenizedText& text) const {
  return loss_and_gradients(loss, image, text).image;
}

std::vector<std::vector<double>> VisionLanguageModel::gradient_wrt_word_embeddings(
    const LossSpec& loss, const ImageTensor& image, const TokenizedText& text) const {
  return loss_and_gradients(loss, image, text).word_embeddings;
}

}  // namespace transvqa
