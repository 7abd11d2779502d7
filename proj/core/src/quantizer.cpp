// SPDX-License-Identifier: Apache-2.0
#include "neuromax/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "neuromax/errors.hpp"

namespace neuromax {

double QuantParams::step() const { return std::ldexp(1.0, -frac_bits); }

bool QuantParams::shift_compatible() const {
  return std::abs(base - std::exp2(std::ldexp(1.0, -frac_bits))) < 1e-12;
}

void QuantParams::validate() const {
  if (int_bits < 1 || frac_bits < 0 || int_bits + frac_bits > 16) {
    throw ConfigError("quantizer: need m >= 1, n >= 0, m + n <= 16");
  }
  if (!(base > 1.0) || !std::isfinite(base)) {
    throw ConfigError("quantizer: base must be finite and > 1");
  }
}

double LogCode::field_value(const QuantParams& p) const {
  return zero ? 0.0 : std::ldexp(static_cast<double>(exponent), -p.frac_bits);
}

double FixedFormat::scale() const { return std::ldexp(1.0, frac_bits); }

void FixedFormat::validate() const {
  if (total_bits < 2 || total_bits > 32 || frac_bits < 0 || frac_bits >= total_bits) {
    throw ConfigError("fixed format: need 2 <= bits <= 32 and 0 <= frac < bits");
  }
}

double FixedPoint::value() const { return std::ldexp(static_cast<double>(raw), -frac_bits); }

FixedPoint linear_quantize(double x, const QuantParams& p) {
  p.validate();
  if (std::isnan(x)) throw std::invalid_argument("linear_quantize: NaN input");
  const double lo = static_cast<double>(p.min_exponent());
  const double hi = static_cast<double>(p.max_exponent());
  // std::round rounds halfway cases away from zero.
  const double steps = std::clamp(std::round(x / p.step()), lo, hi);
  return FixedPoint{static_cast<std::int64_t>(steps), p.frac_bits};
}

LogCode log_quantize(double x, const QuantParams& p) {
  p.validate();
  if (!std::isfinite(x)) throw std::invalid_argument("log_quantize: non-finite input");
  if (x == 0.0) return LogCode::zero_code();
  const double e = std::log2(std::abs(x)) / std::log2(p.base);
  const double k = std::clamp(std::round(e), static_cast<double>(p.min_exponent()),
                              static_cast<double>(p.max_exponent()));
  return LogCode::of(static_cast<int>(k), x < 0.0);
}

double dequantize(const LogCode& c, const QuantParams& p) {
  if (c.zero) return 0.0;
  const double mag = std::pow(p.base, c.exponent);
  return c.negative ? -mag : mag;
}

LogTable::LogTable(const QuantParams& p, const FixedFormat& fmt, std::size_t max_entries)
    : format_(fmt) {
  p.validate();
  fmt.validate();
  const auto entries = static_cast<std::size_t>(fmt.max_raw()) + 1;
  if (entries > max_entries) {
    throw ConfigError("log table: " + std::to_string(entries) + " entries exceeds cap of " +
                      std::to_string(max_entries));
  }
  exponents_.resize(entries);
  exponents_[0] = kZero;
  const long double log2_base = std::log2(static_cast<long double>(p.base));
  for (std::size_t raw = 1; raw < entries; ++raw) {
    const long double e =
        (std::log2(static_cast<long double>(raw)) - fmt.frac_bits) / log2_base;
    auto k = static_cast<long>(std::floor(e));
    if (e - static_cast<long double>(k) > 0.5L) ++k;  // exact ties stay on the smaller code
    k = std::clamp<long>(k, p.min_exponent(), p.max_exponent());
    exponents_[raw] = static_cast<std::int16_t>(k);
  }
}

LogCode LogTable::lookup(std::int64_t raw) const {
  if (exponents_.empty()) throw std::logic_error("log table not built");
  const auto idx = std::clamp<std::int64_t>(raw, 0, static_cast<std::int64_t>(exponents_.size()) - 1);
  const auto k = exponents_[static_cast<std::size_t>(idx)];
  return k == kZero ? LogCode::zero_code() : LogCode::of(k);
}

LogTable build_log_table(const QuantParams& p, const FixedFormat& fmt, std::size_t max_entries) {
  return LogTable(p, fmt, max_entries);
}

QuantErrorStats quant_error_stats(std::span<const double> samples, const QuantParams& p) {
  if (samples.empty()) throw std::invalid_argument("quant_error_stats: empty sample set");
  QuantErrorStats s;
  double sum = 0.0;
  for (double x : samples) {
    if (x == 0.0 || !std::isfinite(x)) {
      throw std::invalid_argument("quant_error_stats: samples must be finite and nonzero");
    }
    const double q = dequantize(log_quantize(x, p), p);
    const double rel = std::abs(std::abs(q) - std::abs(x)) / std::abs(x);
    s.max_rel_err = std::max(s.max_rel_err, rel);
    sum += rel;
  }
  s.count = samples.size();
  s.mean_rel_err = sum / static_cast<double>(s.count);
  return s;
}

}  // namespace neuromax
