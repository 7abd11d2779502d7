// SPDX-License-Identifier: Apache-2.0
#include "neuromax/pe_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "neuromax/errors.hpp"

namespace neuromax {

PsumWord saturating_add(PsumWord a, PsumWord b) {
  const std::int64_t s = std::int64_t{a} + b;
  return static_cast<PsumWord>(std::clamp<std::int64_t>(
      s, std::numeric_limits<PsumWord>::min(), std::numeric_limits<PsumWord>::max()));
}

PsumWord clamp_to_format(std::int64_t v, const FixedFormat& fmt) {
  return static_cast<PsumWord>(std::clamp(v, fmt.min_raw(), fmt.max_raw()));
}

ThreadLut ThreadLut::build(const QuantParams& p, const FixedFormat& psum_format, int guard_bits) {
  p.validate();
  psum_format.validate();
  if (!p.shift_compatible()) {
    throw ConfigError("thread LUT: base must equal 2^(2^-n) for shift/LUT multiplication");
  }
  if (guard_bits < 0 || psum_format.frac_bits + guard_bits > 40) {
    throw ConfigError("thread LUT: guard bits out of range");
  }
  ThreadLut lut;
  lut.psum_format = psum_format;
  lut.index_bits = p.frac_bits;
  lut.guard_bits = guard_bits;
  const int count = 1 << p.frac_bits;
  lut.entries.resize(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double frac = std::ldexp(static_cast<double>(k), -p.frac_bits);
    lut.entries[static_cast<std::size_t>(k)] =
        std::llround(std::ldexp(std::exp2(frac), lut.entry_frac_bits()));
  }
  return lut;
}

PsumWord thread_multiply(const LogCode& w, const LogCode& a, const ThreadLut& lut,
                         ThreadCounters* counters) {
  if (!a.zero && a.negative) {
    throw std::invalid_argument("thread_multiply: activations carry no sign");
  }
  if (counters) ++counters->products;
  if (w.zero || a.zero) return 0;

  const int g = w.exponent + a.exponent;
  const int int_part = g >> lut.index_bits;  // floor
  const int frac_index = g & ((1 << lut.index_bits) - 1);
  const std::int64_t entry = lut.entries[static_cast<std::size_t>(frac_index)];
  const std::int64_t max_raw = lut.psum_format.max_raw();

  // Entry carries entry_frac_bits of fraction; the result carries the psum
  // format's. One barrel shift covers both the exponent and the rescale.
  const int shift = int_part - lut.guard_bits;
  std::int64_t magnitude;
  if (shift >= 0) {
    if (shift >= 62 || entry > (max_raw >> shift)) {
      magnitude = max_raw;
      if (counters) ++counters->saturations;
    } else {
      magnitude = entry << shift;
    }
  } else {
    magnitude = shift <= -63 ? 0 : entry >> -shift;
    if (magnitude > max_raw) {
      magnitude = max_raw;
      if (counters) ++counters->saturations;
    }
  }
  return static_cast<PsumWord>(w.negative ? -magnitude : magnitude);
}

PeOutput pe_compute(const PeWeights& w, const LogCode& a, const ThreadLut& lut,
                    ThreadCounters* counters) {
  PeOutput out{};
  for (int j = 0; j < kThreadsPerPe; ++j) out[j] = thread_multiply(w[j], a, lut, counters);
  return out;
}

MatrixProducts matrix_compute(std::span<const LogCode> inputs, std::span<const PeWeights> weights,
                              const ThreadLut& lut, ThreadCounters* counters) {
  if (inputs.size() != kPesPerMatrix || weights.size() != kPesPerMatrix) {
    throw ShapeError("matrix_compute: expected 6x3 inputs and 6x3 weight vectors, got " +
                     std::to_string(inputs.size()) + " and " + std::to_string(weights.size()));
  }
  MatrixProducts out{};
  for (int pe = 0; pe < kPesPerMatrix; ++pe) {
    out[pe] = pe_compute(weights[pe], inputs[pe], lut, counters);
  }
  return out;
}

MatrixPsums adder_net0(const MatrixProducts& grid) {
  MatrixPsums o{};
  for (int r = 0; r < kMatrixRows; ++r) {
    for (int j = 0; j < kThreadsPerPe; ++j) {
      PsumWord sum = 0;
      for (int c = 0; c < kMatrixCols; ++c) sum = saturating_add(sum, grid[r * kMatrixCols + c][j]);
      o[r * kThreadsPerPe + j] = sum;
    }
  }
  return o;
}

}  // namespace neuromax
