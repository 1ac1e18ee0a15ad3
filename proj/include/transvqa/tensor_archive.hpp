#pragma once

// Flat binary tensor archive:
//
//   bytes 0..7   magic "TVQATNS1"
//   bytes 8..15  manifest length L, uint64 little-endian
//   next L bytes UTF-8 JSON manifest:
//                {"tensors": [{"name", "shape", "dtype": "float64",
//                              "offset", "nbytes"}, ...]}
//   remainder    tensor payloads, little-endian IEEE-754 float64, each at
//                `offset` bytes from the start of the payload section.
//
// Tensors are stored in insertion order, row-major.

#include "transvqa/core.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace transvqa {

struct StoredTensor {
  std::vector<std::int64_t> shape;
  std::vector<double> values;
};

class TensorArchive {
 public:
  void put(const std::string& name, std::vector<std::int64_t> shape, std::vector<double> values);
  const StoredTensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<std::string>& names() const { return order_; }

  void save(const std::string& path) const;
  static TensorArchive load(const std::string& path);

  std::string serialize() const;
  static TensorArchive deserialize(const std::string& bytes);

 private:
  std::vector<std::string> order_;
  std::map<std::string, StoredTensor> index_;
};

/// Sidecar holding an adversarial image at full precision.
void save_image_tensor(const std::string& path, const ImageTensor& image);
ImageTensor load_image_tensor(const std::string& path);

}  // namespace transvqa
