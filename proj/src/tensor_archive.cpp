#include "transvqa/tensor_archive.hpp"

#include "json.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace transvqa {

namespace {

constexpr char kMagic[8] = {'T', 'V', 'Q', 'A', 'T', 'N', 'S', '1'};

static_assert(std::endian::native == std::endian::little, "archive I/O assumes little-endian");

void append_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

}  // namespace

void TensorArchive::put(const std::string& name, std::vector<std::int64_t> shape,
                        std::vector<double> values) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw Error("negative dimension in tensor " + name);
    n *= d;
  }
  if (static_cast<std::size_t>(n) != values.size()) {
    throw Error("tensor " + name + " shape does not match value count");
  }
  if (!index_.count(name)) order_.push_back(name);
  index_[name] = StoredTensor{std::move(shape), std::move(values)};
}

const StoredTensor& TensorArchive::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("tensor archive has no entry '" + name + "'");
  return it->second;
}

std::string TensorArchive::serialize() const {
  nlohmann::json manifest;
  manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& name : order_) {
    const auto& t = index_.at(name);
    std::uint64_t nbytes = t.values.size() * sizeof(double);
    manifest["tensors"].push_back({{"name", name},
                                   {"shape", t.shape},
                                   {"dtype", "float64"},
                                   {"offset", offset},
                                   {"nbytes", nbytes}});
    offset += nbytes;
  }
  std::string header = manifest.dump();
  std::string out(kMagic, 8);
  append_u64(out, header.size());
  out += header;
  for (const auto& name : order_) {
    const auto& v = index_.at(name).values;
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  return out;
}

TensorArchive TensorArchive::deserialize(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw Error("not a tensor archive (bad magic)");
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (16 + header_len > bytes.size()) throw Error("tensor archive manifest truncated");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("tensor archive manifest: ") + e.what());
  }
  const std::size_t payload = 16 + header_len;
  TensorArchive archive;
  for (const auto& entry : manifest.at("tensors")) {
    if (entry.at("dtype") != "float64") throw Error("unsupported dtype in tensor archive");
    auto offset = entry.at("offset").get<std::uint64_t>();
    auto nbytes = entry.at("nbytes").get<std::uint64_t>();
    if (payload + offset + nbytes > bytes.size() || nbytes % sizeof(double) != 0) {
      throw Error("tensor archive payload truncated");
    }
    std::vector<double> values(nbytes / sizeof(double));
    std::memcpy(values.data(), bytes.data() + payload + offset, nbytes);
    archive.put(entry.at("name").get<std::string>(),
                entry.at("shape").get<std::vector<std::int64_t>>(), std::move(values));
  }
  return archive;
}

void TensorArchive::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  auto bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path);
}

TensorArchive TensorArchive::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

void save_image_tensor(const std::string& path, const ImageTensor& image) {
  TensorArchive a;
  const auto& s = image.shape();
  a.put("image",
        {static_cast<std::int64_t>(s.height), static_cast<std::int64_t>(s.width),
         static_cast<std::int64_t>(s.channels)},
        image.data());
  a.save(path);
}

ImageTensor load_image_tensor(const std::string& path) {
  auto a = TensorArchive::load(path);
  const auto& t = a.get("image");
  if (t.shape.size() != 3) throw Error(path + ": image tensor must be rank 3");
  Shape s{static_cast<std::size_t>(t.shape[0]), static_cast<std::size_t>(t.shape[1]),
          static_cast<std::size_t>(t.shape[2])};
  return ImageTensor(s, t.values);
}

}  // namespace transvqa
