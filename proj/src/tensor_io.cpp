#include "iob/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace iob {

namespace {

constexpr char kTensorMagic[4] = {'I', 'O', 'B', 'T'};
constexpr char kModelMagic[4] = {'I', 'O', 'B', 'M'};

template <typename T>
void put_le(std::ostream& os, T value) {
  unsigned char buf[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(value >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is, const std::string& context) {
  unsigned char buf[sizeof(T)];
  const std::streamoff at = is.tellg();
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T)))
    throw FormatError(context + ": truncated file", at);
  T value = 0;
  for (size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(buf[i]) << (8 * i);
  return value;
}

}  // namespace

FormatError::FormatError(const std::string& what, std::streamoff off)
    : std::runtime_error(what + " (byte offset " + std::to_string(off) + ")"), offset(off) {}

void write_tensor_stream(std::ostream& os, const Tensor& tensor) {
  os.write(kTensorMagic, 4);
  put_le<uint8_t>(os, 1);  // version
  put_le<uint8_t>(os, 0);  // dtype f32
  put_le<uint16_t>(os, 0);
  put_le<uint32_t>(os, static_cast<uint32_t>(tensor.ndim()));
  for (int64_t d : tensor.shape()) put_le<uint64_t>(os, static_cast<uint64_t>(d));
  // assumes little-endian host floats; fine for this artifact's targets
  os.write(reinterpret_cast<const char*>(tensor.data()),
           static_cast<std::streamsize>(tensor.size() * sizeof(float)));
}

Tensor read_tensor_stream(std::istream& is, const std::string& context) {
  const std::streamoff start = is.tellg();
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kTensorMagic, 4) != 0)
    throw FormatError(context + ": bad tensor magic", start);
  const uint8_t version = get_le<uint8_t>(is, context);
  if (version != 1) throw FormatError(context + ": unsupported version", start + 4);
  const uint8_t dtype = get_le<uint8_t>(is, context);
  if (dtype != 0) throw FormatError(context + ": unsupported dtype", start + 5);
  get_le<uint16_t>(is, context);  // reserved
  const uint32_t ndim = get_le<uint32_t>(is, context);
  if (ndim == 0) throw FormatError(context + ": empty shape", start + 8);
  Shape shape;
  for (uint32_t i = 0; i < ndim; ++i) {
    const uint64_t d = get_le<uint64_t>(is, context);
    if (d == 0) throw FormatError(context + ": zero dimension", is.tellg());
    shape.push_back(static_cast<int64_t>(d));
  }
  Tensor t(shape);
  const std::streamoff payload_at = is.tellg();
  if (!is.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.size() * sizeof(float))))
    throw FormatError(context + ": truncated payload", payload_at);
  return t;
}

void write_tensor_file(const std::string& path, const Tensor& tensor) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_tensor_file: cannot open " + path);
  write_tensor_stream(os, tensor);
  if (!os) throw std::runtime_error("write_tensor_file: write failed for " + path);
}

Tensor read_tensor_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_tensor_file: cannot open " + path);
  return read_tensor_stream(is, path);
}

void export_pgm(const std::string& path, const Tensor& image) {
  int64_t h = 0, w = 0;
  if (image.ndim() == 3 && image.dim(0) == 1) {
    h = image.dim(1);
    w = image.dim(2);
  } else if (image.ndim() == 2) {
    h = image.dim(0);
    w = image.dim(1);
  } else {
    throw std::invalid_argument("export_pgm: expected [1,H,W] or [H,W], got " +
                                shape_str(image.shape()));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("export_pgm: cannot open " + path);
  os << "P5\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(w));
  for (int64_t i = 0; i < h; ++i) {
    for (int64_t j = 0; j < w; ++j) {
      const float v = std::clamp(image.at(i * w + j), 0.0f, 1.0f);
      row[static_cast<size_t>(j)] = static_cast<unsigned char>(std::floor(255.0f * v + 0.5f));
    }
    os.write(reinterpret_cast<const char*>(row.data()), w);
  }
  if (!os) throw std::runtime_error("export_pgm: write failed for " + path);
}

void write_model_file(const std::string& path,
                      const std::vector<std::pair<std::string, Tensor>>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_model_file: cannot open " + path);
  os.write(kModelMagic, 4);
  put_le<uint8_t>(os, 1);
  put_le<uint8_t>(os, 0);
  put_le<uint16_t>(os, 0);
  put_le<uint32_t>(os, static_cast<uint32_t>(records.size()));
  for (const auto& [name, tensor] : records) {
    put_le<uint16_t>(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor_stream(os, tensor);
  }
  if (!os) throw std::runtime_error("write_model_file: write failed for " + path);
}

std::vector<std::pair<std::string, Tensor>> read_model_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_model_file: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0)
    throw FormatError(path + ": bad model magic", 0);
  if (get_le<uint8_t>(is, path) != 1) throw FormatError(path + ": unsupported version", 4);
  get_le<uint8_t>(is, path);
  get_le<uint16_t>(is, path);
  const uint32_t count = get_le<uint32_t>(is, path);
  std::vector<std::pair<std::string, Tensor>> records;
  records.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t len = get_le<uint16_t>(is, path);
    std::string name(len, '\0');
    const std::streamoff at = is.tellg();
    if (!is.read(name.data(), len)) throw FormatError(path + ": truncated record name", at);
    records.emplace_back(std::move(name), read_tensor_stream(is, path));
  }
  return records;
}

}  // namespace iob
