#pragma once

#include "transvqa/core.hpp"

#include <string>

namespace transvqa {

/// Reads an 8-bit image (PNG, or binary PPM "P6") as RGB in [0,1].
ImageTensor read_image(const std::string& path);

/// Writes 8-bit RGB, rounding each value to the nearest of 256 levels.
/// The format follows the extension: ".ppm" or PNG otherwise.
void write_image(const std::string& path, const ImageTensor& image);

/// The image after an 8-bit round trip.
ImageTensor quantize8(const ImageTensor& image);

}  // namespace transvqa
