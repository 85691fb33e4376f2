#pragma once

#include <filesystem>
#include <iosfwd>

#include "mgvsr/tensor.hpp"

namespace mgvsr {

// Raw tensor file: little-endian int64 rank, then rank int64 dims, then the
// payload as little-endian float64 in row-major order. No magic, no padding.

void write_tensor(std::ostream& os, const Tensor<double>& t);
Tensor<double> read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor<double>& t);
Tensor<double> load_tensor(const std::filesystem::path& path);

}  // namespace mgvsr
