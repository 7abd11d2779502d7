// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "neuromax/pe_core.hpp"
#include "neuromax/quantizer.hpp"
#include "neuromax/tensor.hpp"

namespace neuromax {

// .tns layout, little-endian:
//   "NMXT"  u16 version (1)  u8 kind  u8 reserved (0)  u32 n, c, h, w  payload
// kind 1: f32 per element, kind 2: one log-code byte, kind 3: i32 psum (raw).
enum class TensorKind : std::uint8_t { real = 1, logcode = 2, psum = 3 };

inline constexpr std::uint16_t kTensorFormatVersion = 1;

/// Log-code byte: bit 7 sign, bit 6 clear, bits 5..0 the exponent in 6-bit
/// two's complement. 0xFF is the zero code. Throws ConfigError for
/// exponents outside [-32, 31].
std::uint8_t encode_logcode(const LogCode& c);
/// Throws ParseError on a byte with bit 6 set other than 0xFF.
LogCode decode_logcode(std::uint8_t b);

void write_tensor(std::ostream& os, const Tensor<double>& t);  // stored as f32
void write_tensor(std::ostream& os, const Tensor<LogCode>& t);
void write_tensor(std::ostream& os, const Tensor<PsumWord>& t);

/// Header only; leaves the stream at the payload. Throws ParseError.
TensorKind read_tensor_header(std::istream& is, Shape& shape);

Tensor<double> read_real_tensor(std::istream& is);
Tensor<LogCode> read_logcode_tensor(std::istream& is);
Tensor<PsumWord> read_psum_tensor(std::istream& is);

/// File wrappers; throw IoError when the file cannot be opened.
template <typename T>
void save_tensor(const std::filesystem::path& p, const Tensor<T>& t);
Tensor<double> load_real_tensor(const std::filesystem::path& p);
Tensor<LogCode> load_logcode_tensor(const std::filesystem::path& p);
Tensor<PsumWord> load_psum_tensor(const std::filesystem::path& p);
TensorKind peek_tensor_kind(const std::filesystem::path& p);

}  // namespace neuromax
