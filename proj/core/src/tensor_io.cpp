// SPDX-License-Identifier: Apache-2.0
#include "neuromax/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "neuromax/errors.hpp"

namespace neuromax {

namespace {

constexpr std::array<char, 4> kMagic{'N', 'M', 'X', 'T'};
// Refuse absurd headers before allocating.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

template <typename U>
void put_le(std::ostream& os, U v) {
  std::array<char, sizeof(U)> b{};
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), b.size());
}

template <typename U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), b.size())) {
    throw ParseError("tensor file truncated");
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(U{b[i]} << (8 * i));
  return v;
}

void write_header(std::ostream& os, TensorKind kind, const Shape& s) {
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(os, kTensorFormatVersion);
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(kind));
  put_le<std::uint8_t>(os, 0);
  for (int d : {s.n, s.c, s.h, s.w}) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
}

void check_stream(std::ostream& os) {
  if (!os) throw IoError("tensor write failed");
}

void expect_kind(TensorKind got, TensorKind want) {
  if (got != want) {
    throw ParseError("tensor kind " + std::to_string(static_cast<int>(got)) + ", expected " +
                     std::to_string(static_cast<int>(want)));
  }
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot open " + p.string());
  return f;
}

}  // namespace

std::uint8_t encode_logcode(const LogCode& c) {
  if (c.zero) return 0xFF;
  if (c.exponent < -32 || c.exponent > 31) {
    throw ConfigError("log code exponent " + std::to_string(c.exponent) + " does not fit 6 bits");
  }
  return static_cast<std::uint8_t>((c.negative ? 0x80 : 0) | (c.exponent & 0x3F));
}

LogCode decode_logcode(std::uint8_t b) {
  if (b == 0xFF) return LogCode::zero_code();
  if (b & 0x40) throw ParseError("invalid log code byte " + std::to_string(b));
  int e = b & 0x3F;
  if (e & 0x20) e -= 64;
  return LogCode::of(e, (b & 0x80) != 0);
}

void write_tensor(std::ostream& os, const Tensor<double>& t) {
  write_header(os, TensorKind::real, t.shape());
  for (double v : t.data()) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  check_stream(os);
}

void write_tensor(std::ostream& os, const Tensor<LogCode>& t) {
  write_header(os, TensorKind::logcode, t.shape());
  for (const auto& c : t.data()) put_le<std::uint8_t>(os, encode_logcode(c));
  check_stream(os);
}

void write_tensor(std::ostream& os, const Tensor<PsumWord>& t) {
  write_header(os, TensorKind::psum, t.shape());
  for (PsumWord v : t.data()) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  check_stream(os);
}

TensorKind read_tensor_header(std::istream& is, Shape& shape) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ParseError("not a tensor file (bad magic)");
  }
  const auto version = get_le<std::uint16_t>(is);
  if (version != kTensorFormatVersion) {
    throw ParseError("unsupported tensor format version " + std::to_string(version));
  }
  const auto kind = get_le<std::uint8_t>(is);
  get_le<std::uint8_t>(is);
  if (kind < 1 || kind > 3) throw ParseError("unknown tensor kind " + std::to_string(kind));
  std::array<std::uint32_t, 4> d{};
  std::uint64_t count = 1;
  for (auto& v : d) {
    v = get_le<std::uint32_t>(is);
    if (v > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
      throw ParseError("tensor dimension too large");
    }
    count *= v;
    if (count > kMaxElements) throw ParseError("tensor too large");
  }
  shape = Shape{static_cast<int>(d[0]), static_cast<int>(d[1]), static_cast<int>(d[2]),
                static_cast<int>(d[3])};
  return static_cast<TensorKind>(kind);
}

Tensor<double> read_real_tensor(std::istream& is) {
  Shape s;
  expect_kind(read_tensor_header(is, s), TensorKind::real);
  Tensor<double> t(s);
  for (auto& v : t.data()) v = std::bit_cast<float>(get_le<std::uint32_t>(is));
  return t;
}

Tensor<LogCode> read_logcode_tensor(std::istream& is) {
  Shape s;
  expect_kind(read_tensor_header(is, s), TensorKind::logcode);
  Tensor<LogCode> t(s);
  for (auto& v : t.data()) v = decode_logcode(get_le<std::uint8_t>(is));
  return t;
}

Tensor<PsumWord> read_psum_tensor(std::istream& is) {
  Shape s;
  expect_kind(read_tensor_header(is, s), TensorKind::psum);
  Tensor<PsumWord> t(s);
  for (auto& v : t.data()) v = static_cast<PsumWord>(get_le<std::uint32_t>(is));
  return t;
}

template <typename T>
void save_tensor(const std::filesystem::path& p, const Tensor<T>& t) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + p.string());
  write_tensor(f, t);
}

template void save_tensor(const std::filesystem::path&, const Tensor<double>&);
template void save_tensor(const std::filesystem::path&, const Tensor<LogCode>&);
template void save_tensor(const std::filesystem::path&, const Tensor<PsumWord>&);

Tensor<double> load_real_tensor(const std::filesystem::path& p) {
  auto f = open_in(p);
  return read_real_tensor(f);
}

Tensor<LogCode> load_logcode_tensor(const std::filesystem::path& p) {
  auto f = open_in(p);
  return read_logcode_tensor(f);
}

Tensor<PsumWord> load_psum_tensor(const std::filesystem::path& p) {
  auto f = open_in(p);
  return read_psum_tensor(f);
}

TensorKind peek_tensor_kind(const std::filesystem::path& p) {
  auto f = open_in(p);
  Shape s;
  return read_tensor_header(f, s);
}

}  // namespace neuromax
