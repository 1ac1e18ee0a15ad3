#pragma once

#include "transvqa/evalkit.hpp"
#include "transvqa/model_adapter.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace transvqa {

/// Question built from the toy vocabulary, e.g. "what is the guy holding?".
std::string synthetic_question(std::uint64_t seed);

/// Writes `n` random toy-shaped PNG images plus dataset.jsonl into `dir`.
/// Each answer is the victim's prediction on the stored (8-bit) image, so
/// every sample is clean-correct for that victim. Returns the dataset path.
std::string make_synthetic_dataset(const std::string& dir, int n, std::uint64_t seed,
                                   const VqaVictim& victim);

}  // namespace transvqa
