#include "mgvsr/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace mgvsr {
namespace {

constexpr std::int64_t kMaxRank = 16;

template <typename U>
std::array<char, sizeof(U)> to_le_bytes(U value) {
  std::array<char, sizeof(U)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return bytes;
}

template <typename U>
U from_le_bytes(std::array<char, sizeof(U)> bytes) {
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  U value;
  std::memcpy(&value, bytes.data(), sizeof(U));
  return value;
}

template <typename U>
void put(std::ostream& os, U value) {
  const auto bytes = to_le_bytes(value);
  os.write(bytes.data(), bytes.size());
}

template <typename U>
U get(std::istream& is) {
  std::array<char, sizeof(U)> bytes;
  if (!is.read(bytes.data(), bytes.size())) throw IoError("tensor file truncated");
  return from_le_bytes<U>(bytes);
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor<double>& t) {
  put<std::int64_t>(os, static_cast<std::int64_t>(t.rank()));
  for (std::size_t d : t.shape()) put<std::int64_t>(os, static_cast<std::int64_t>(d));
  for (double v : t.data()) put<double>(os, v);
  if (!os) throw IoError("failed to write tensor");
}

Tensor<double> read_tensor(std::istream& is) {
  const auto rank = get<std::int64_t>(is);
  if (rank < 0 || rank > kMaxRank) throw IoError("tensor file has invalid rank " + std::to_string(rank));
  Shape shape;
  for (std::int64_t i = 0; i < rank; ++i) {
    const auto d = get<std::int64_t>(is);
    if (d < 0) throw IoError("tensor file has negative dimension");
    shape.push_back(static_cast<std::size_t>(d));
  }
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = get<double>(is);
  return Tensor<double>(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor<double>& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor(os, t);
}

Tensor<double> load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_tensor(is);
}

}  // namespace mgvsr
