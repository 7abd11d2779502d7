// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace neuromax {

/// Quantization parameters <m, n, b>.
///
/// A log code stores an integer exponent k. The code field is a signed
/// Q(m.n) number holding k * 2^-n, so the representable exponents are
/// [-2^(m+n-1), 2^(m+n-1) - 1]. The magnitude is base^k. On the accelerator
/// path base = sqrt(2) and n = 1, which makes the Q(5.1) field equal to
/// log2 of the magnitude and lets a thread evaluate products with a
/// two-entry LUT and a barrel shift.
struct QuantParams {
  int int_bits = 5;   // m
  int frac_bits = 1;  // n
  double base = std::numbers::sqrt2;

  static QuantParams accelerator() { return {}; }

  double step() const;  // epsilon = 2^-n
  int min_exponent() const { return -(1 << (int_bits + frac_bits - 1)); }
  int max_exponent() const { return (1 << (int_bits + frac_bits - 1)) - 1; }
  /// True when base == 2^(2^-n), the relation the shift/LUT thread relies on.
  bool shift_compatible() const;
  void validate() const;
};

/// Sign + exponent + zero flag. When `zero` is set the other fields are ignored.
struct LogCode {
  bool zero = true;
  bool negative = false;
  int exponent = 0;

  static constexpr LogCode zero_code() { return {}; }
  static constexpr LogCode of(int exponent, bool negative = false) {
    return LogCode{false, negative, exponent};
  }

  /// Value of the Q(m.n) code field: exponent * 2^-n.
  double field_value(const QuantParams& p) const;

  friend constexpr bool operator==(const LogCode& a, const LogCode& b) {
    if (a.zero || b.zero) return a.zero == b.zero;
    return a.negative == b.negative && a.exponent == b.exponent;
  }
};

/// Signed fixed-point storage format: `total_bits` wide with `frac_bits` fraction.
struct FixedFormat {
  int total_bits = 16;
  int frac_bits = 8;

  std::int64_t max_raw() const { return (std::int64_t{1} << (total_bits - 1)) - 1; }
  std::int64_t min_raw() const { return -(std::int64_t{1} << (total_bits - 1)); }
  double scale() const;  // 2^frac_bits
  void validate() const;
};

/// value = raw * 2^-frac_bits
struct FixedPoint {
  std::int64_t raw = 0;
  int frac_bits = 0;

  double value() const;
  friend bool operator==(const FixedPoint&, const FixedPoint&) = default;
};

/// Round x to the epsilon lattice and clip to [-2^(m-1), 2^(m-1) - eps].
/// Ties round away from zero. Throws std::invalid_argument on NaN.
FixedPoint linear_quantize(double x, const QuantParams& p);

/// Nearest exponent of |x| in base b, clipped to the code range. Zero maps
/// to the zero code; magnitudes below the smallest code clip to the minimum
/// exponent rather than to zero. Throws std::invalid_argument on NaN/Inf.
LogCode log_quantize(double x, const QuantParams& p);

double dequantize(const LogCode& c, const QuantParams& p);

/// Precomputed requantization table: every non-negative raw value of a
/// fixed-point format mapped to its nearest log code (nearest in the log
/// domain; ties go to the smaller magnitude).
class LogTable {
 public:
  LogTable() = default;
  LogTable(const QuantParams& p, const FixedFormat& fmt,
           std::size_t max_entries = std::size_t{1} << 20);

  /// `raw` is clamped into [0, max_raw].
  LogCode lookup(std::int64_t raw) const;
  std::size_t size() const { return exponents_.size(); }
  const FixedFormat& format() const { return format_; }

 private:
  static constexpr std::int16_t kZero = INT16_MIN;
  FixedFormat format_{};
  std::vector<std::int16_t> exponents_;
};

LogTable build_log_table(const QuantParams& p, const FixedFormat& fmt,
                         std::size_t max_entries = std::size_t{1} << 20);

struct QuantErrorStats {
  double max_rel_err = 0.0;
  double mean_rel_err = 0.0;
  std::size_t count = 0;
};

/// Relative magnitude error of log quantization over nonzero samples.
/// Throws std::invalid_argument on an empty set or a zero sample.
QuantErrorStats quant_error_stats(std::span<const double> samples, const QuantParams& p);

}  // namespace neuromax
