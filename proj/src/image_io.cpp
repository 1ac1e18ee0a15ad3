#include "transvqa/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace transvqa {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  std::string tail = s.substr(s.size() - suffix.size());
  std::transform(tail.begin(), tail.end(), tail.begin(), ::tolower);
  return tail == suffix;
}

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open image '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

ImageTensor from_bytes(std::size_t h, std::size_t w, const unsigned char* bytes) {
  ImageTensor img(Shape{h, w, 3});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = bytes[i] / 255.0;
  return img;
}

ImageTensor read_ppm(const std::string& path) {
  std::string data = read_file(path);
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < data.size()) {
      if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };
  if (next_token() != "P6") throw Error("'" + path + "' is not a binary PPM (P6)");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token());
    h = std::stoul(next_token());
    maxval = std::stoul(next_token());
  } catch (const std::exception&) {
    throw Error("malformed PPM header in '" + path + "'");
  }
  if (maxval != 255) throw Error("only 8-bit PPM is supported ('" + path + "')");
  ++pos;  // single whitespace after maxval
  if (w == 0 || h == 0 || data.size() < pos + w * h * 3) {
    throw Error("truncated PPM '" + path + "'");
  }
  return from_bytes(h, w, reinterpret_cast<const unsigned char*>(data.data() + pos));
}

ImageTensor read_png(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error("cannot decode PNG '" + path + "': " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error("cannot decode PNG '" + path + "': " + msg);
  }
  return from_bytes(image.height, image.width, buf.data());
}

std::vector<unsigned char> rgb_bytes(const ImageTensor& image) {
  if (image.shape().channels != 3) {
    throw Error("only RGB images can be written, got " + image.shape().str());
  }
  std::vector<unsigned char> out(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = to_byte(image[i]);
  return out;
}

}  // namespace

ImageTensor read_image(const std::string& path) {
  if (ends_with(path, ".ppm")) return read_ppm(path);
  return read_png(path);
}

void write_image(const std::string& path, const ImageTensor& image) {
  auto bytes = rgb_bytes(image);
  const auto& s = image.shape();
  if (ends_with(path, ".ppm")) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "P6\n" << s.width << " " << s.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to '" + path + "'");
    return;
  }
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(s.width);
  png.height = static_cast<png_uint_32>(s.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw Error("cannot write PNG '" + path + "': " + png.message);
  }
}

ImageTensor quantize8(const ImageTensor& image) {
  ImageTensor out = image;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_byte(image[i]) / 255.0;
  return out;
}

}  // namespace transvqa
