#pragma once

#include <ios>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "iob/tensor.hpp"

namespace iob {

// IOBT container: magic "IOBT", u8 version=1, u8 dtype=0 (f32), u16
// reserved=0, u32 ndim, ndim x u64 dims, little-endian f32 payload,
// row-major. Round-trips are bit-exact.
void write_tensor_file(const std::string& path, const Tensor& tensor);
Tensor read_tensor_file(const std::string& path);

void write_tensor_stream(std::ostream& os, const Tensor& tensor);
Tensor read_tensor_stream(std::istream& is, const std::string& context);

// Binary PGM (P5), maxval 255, v -> round(255*clamp(v,0,1)). Accepts
// [1,H,W] or [H,W].
void export_pgm(const std::string& path, const Tensor& image);

// Model parameter container: magic "IOBM", u8 version=1, u16 reserved,
// u32 record count, then per record a u16-length name followed by an IOBT
// tensor record.
void write_model_file(const std::string& path,
                      const std::vector<std::pair<std::string, Tensor>>& records);
std::vector<std::pair<std::string, Tensor>> read_model_file(const std::string& path);

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::streamoff offset);
  std::streamoff offset;
};

}  // namespace iob
