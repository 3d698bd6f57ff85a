#include "triax/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

namespace triax {

namespace {

constexpr std::array<char, 4> kMagic{'T', 'N', 'S', 'R'};

template <class U>
void put_le(std::ostream& os, U v) {
  std::array<char, sizeof(U)> buf;
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf.data(), buf.size());
}

template <class U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> buf;
  if (!is.read(reinterpret_cast<char*>(buf.data()), buf.size()))
    throw IoError("TNSR: unexpected end of stream");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_tnsr(std::ostream& os, const Tensor& t) {
  if (t.empty()) throw IoError("TNSR: cannot write an empty tensor");
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) {
    if (e > std::numeric_limits<std::uint32_t>::max()) throw IoError("TNSR: extent too large");
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e));
  }
  for (double v : t.data()) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw IoError("TNSR: write failed");
}

Tensor read_tnsr(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic)
    throw IoError("TNSR: bad magic");
  const auto rank = get_le<std::uint32_t>(is);
  if (rank == 0 || rank > 16) throw IoError("TNSR: invalid rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& e : shape) {
    e = get_le<std::uint32_t>(is);
    if (e == 0) throw IoError("TNSR: zero extent");
  }
  std::vector<double> data(shape_size(shape));
  for (auto& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(is));
  return Tensor(std::move(shape), std::move(data));
}

void save_tnsr(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_tnsr(os, t);
}

Tensor load_tnsr(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_tnsr(is);
}

}  // namespace triax
