// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "neuromax/quantizer.hpp"

namespace neuromax {

inline constexpr int kMatrixRows = 6;
inline constexpr int kMatrixCols = 3;
inline constexpr int kThreadsPerPe = 3;
inline constexpr int kMatrixCount = 6;
inline constexpr int kPesPerMatrix = kMatrixRows * kMatrixCols;          // 18
inline constexpr int kPsumsPerMatrix = kMatrixRows * kThreadsPerPe;      // 18 (o1..o18)
inline constexpr int kThreadsPerMatrix = kPesPerMatrix * kThreadsPerPe;  // 54
inline constexpr int kThreadsPerGrid = kThreadsPerMatrix * kMatrixCount; // 324

/// Linear-domain partial sum, scaled by the psum format (Q8.8 by default).
/// Thread products are saturated to the 16-bit format; adder trees carry a
/// 32-bit word and the final value is clamped back to the format on output.
using PsumWord = std::int32_t;

inline constexpr FixedFormat kDefaultPsumFormat{16, 8};

PsumWord saturating_add(PsumWord a, PsumWord b);
/// Clamp a wide accumulation into the psum format range.
PsumWord clamp_to_format(std::int64_t v, const FixedFormat& fmt);

/// The 2^n fractional powers 2^(k * 2^-n) held in each thread. Entries carry
/// `guard_bits` more fraction than the psum format so that left shifts of the
/// sqrt(2) entry stay within one unit of the exact product.
struct ThreadLut {
  FixedFormat psum_format = kDefaultPsumFormat;
  int index_bits = 1;  // n
  int guard_bits = 8;
  std::vector<std::int64_t> entries;

  static ThreadLut build(const QuantParams& p, const FixedFormat& psum_format = kDefaultPsumFormat,
                         int guard_bits = 8);
  int entry_frac_bits() const { return psum_format.frac_bits + guard_bits; }
};

struct ThreadCounters {
  std::uint64_t products = 0;
  std::uint64_t saturations = 0;
};

/// One log-domain multiply: sign(w) * (LUT[FRAC(g)] shifted by INT(g)), with
/// g = w + a in Q(m.n). Right shifts truncate toward zero; left shifts
/// saturate at the format maximum and bump `counters->saturations`.
/// Throws std::invalid_argument for a signed activation.
PsumWord thread_multiply(const LogCode& w, const LogCode& a, const ThreadLut& lut,
                         ThreadCounters* counters = nullptr);

using PeWeights = std::array<LogCode, kThreadsPerPe>;
using PeOutput = std::array<PsumWord, kThreadsPerPe>;

PeOutput pe_compute(const PeWeights& w, const LogCode& a, const ThreadLut& lut,
                    ThreadCounters* counters = nullptr);

/// PE (r, c) lives at index r * 3 + c.
using MatrixInputs = std::array<LogCode, kPesPerMatrix>;
using MatrixWeights = std::array<PeWeights, kPesPerMatrix>;
using MatrixProducts = std::array<PeOutput, kPesPerMatrix>;
/// o1..o18 stored 0-based: o[3r + j] sums thread j across the PEs of row r.
using MatrixPsums = std::array<PsumWord, kPsumsPerMatrix>;

MatrixProducts matrix_compute(std::span<const LogCode> inputs, std::span<const PeWeights> weights,
                              const ThreadLut& lut, ThreadCounters* counters = nullptr);

MatrixPsums adder_net0(const MatrixProducts& grid);

}  // namespace neuromax
