// SPDX-License-Identifier: Apache-2.0
#include "neuromax/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "neuromax/errors.hpp"

namespace neuromax {

namespace {

void check_shapes(const Shape& in, const Shape& w, int kernel, int stride, ConvType mode) {
  if (kernel < 1 || stride < 1) throw ShapeError("oracle: kernel and stride must be positive");
  if (in.n != 1) throw ShapeError("oracle: batch size must be 1, got " + in.str());
  if (in.h < kernel || in.w < kernel) throw ShapeError("oracle: input smaller than kernel");
  if (w.h != kernel || w.w != kernel) throw ShapeError("oracle: weight kernel dims " + w.str());
  if (mode == ConvType::depthwise) {
    if (w.n != in.c || w.c != 1) throw ShapeError("oracle: depthwise weights must be C x 1 x k x k");
  } else {
    if (w.c != in.c) throw ShapeError("oracle: weight channels " + w.str() + " vs input " + in.str());
    if (mode == ConvType::pointwise && kernel != 1) throw ShapeError("oracle: pointwise needs k = 1");
  }
}

Shape out_shape(const Shape& in, const Shape& w, int kernel, int stride, ConvType mode) {
  return {1, mode == ConvType::depthwise ? in.c : w.n, (in.h - kernel) / stride + 1,
          (in.w - kernel) / stride + 1};
}

// floor(|product| * 2^frac) for two nonzero codes: base^(kw + ka).
std::int64_t exact_product_raw(int exponent_sum, const QuantParams& p, int frac_bits) {
  // With base = 2^(2^-n) the log2 of the product is exactly sum * 2^-n; going
  // through log2(base) would let the rounding of base push exact powers of
  // two just below an integer.
  const long double e =
      p.shift_compatible()
          ? std::ldexp(static_cast<long double>(exponent_sum), -p.frac_bits)
          : static_cast<long double>(exponent_sum) * std::log2(static_cast<long double>(p.base));
  const long double whole = std::floor(e);
  const long double v = std::ldexp(std::exp2(e - whole), static_cast<int>(whole) + frac_bits);
  if (v >= 9.0e18L) return std::numeric_limits<std::int64_t>::max();
  return static_cast<std::int64_t>(std::floor(v));
}

}  // namespace

Tensor<double> conv2d_oracle(const Tensor<double>& input, const Tensor<double>& weights, int kernel,
                             int stride, ConvType mode) {
  const Shape& is = input.shape();
  const Shape& ws = weights.shape();
  check_shapes(is, ws, kernel, stride, mode);
  Tensor<double> out(out_shape(is, ws, kernel, stride, mode));
  const Shape& os = out.shape();
  for (int f = 0; f < os.c; ++f) {
    for (int y = 0; y < os.h; ++y) {
      for (int x = 0; x < os.w; ++x) {
        long double acc = 0.0L;
        const int c_lo = mode == ConvType::depthwise ? f : 0;
        const int c_hi = mode == ConvType::depthwise ? f + 1 : is.c;
        for (int c = c_lo; c < c_hi; ++c) {
          for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
              const double w = mode == ConvType::depthwise ? weights.at(f, 0, ky, kx)
                                                           : weights.at(f, c, ky, kx);
              acc += static_cast<long double>(w) * input.at(c, y * stride + ky, x * stride + kx);
            }
          }
        }
        out.at(f, y, x) = static_cast<double>(acc);
      }
    }
  }
  return out;
}

Tensor<std::int32_t> conv2d_quant_oracle(const Tensor<LogCode>& input,
                                         const Tensor<LogCode>& weights, const LayerConfig& cfg,
                                         const FixedFormat& psum_format, const QuantParams& p) {
  cfg.validate();
  if (!(input.shape() == cfg.input_shape())) {
    throw ShapeError("oracle: input " + input.shape().str() + " vs layer " + cfg.input_shape().str());
  }
  if (!(weights.shape() == cfg.weight_shape())) {
    throw ShapeError("oracle: weights " + weights.shape().str() + " vs layer " +
                     cfg.weight_shape().str());
  }
  const int k = cfg.kernel;
  const int s = cfg.stride;
  const bool dw = cfg.type == ConvType::depthwise;
  const std::int64_t hi = psum_format.max_raw();
  const std::int64_t lo = psum_format.min_raw();
  Tensor<std::int32_t> out(cfg.output_shape());
  const Shape& os = out.shape();
  for (int f = 0; f < os.c; ++f) {
    for (int y = 0; y < os.h; ++y) {
      for (int x = 0; x < os.w; ++x) {
        std::int64_t acc = 0;
        for (int c = dw ? f : 0; c < (dw ? f + 1 : cfg.in_c); ++c) {
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const LogCode& a = input.at(c, y * s + ky, x * s + kx);
              const LogCode& w = dw ? weights.at(f, 0, ky, kx) : weights.at(f, c, ky, kx);
              if (a.zero || w.zero) continue;
              const std::int64_t mag =
                  std::min(exact_product_raw(w.exponent + a.exponent, p, psum_format.frac_bits), hi);
              acc += w.negative ? -mag : mag;
            }
          }
        }
        out.at(f, y, x) = static_cast<std::int32_t>(std::clamp(acc, lo, hi));
      }
    }
  }
  return out;
}

Tensor<LogCode> relu_requantize_oracle(const Tensor<std::int32_t>& psums,
                                       const FixedFormat& psum_format, const QuantParams& p) {
  Tensor<LogCode> out(psums.shape());
  const long double log2_base = std::log2(static_cast<long double>(p.base));
  for (std::size_t i = 0; i < psums.size(); ++i) {
    const std::int32_t raw = psums.data()[i];
    if (raw <= 0) continue;
    const long double target = std::log2(static_cast<long double>(raw)) - psum_format.frac_bits;
    int best = p.min_exponent();
    long double best_d = std::numeric_limits<long double>::infinity();
    for (int k = p.min_exponent(); k <= p.max_exponent(); ++k) {
      const long double d = std::abs(target - k * log2_base);
      if (d < best_d - 1e-15L) {
        best_d = d;
        best = k;
      }
    }
    out.data()[i] = LogCode::of(best);
  }
  return out;
}

Tensor<double> dequantize_tensor(const Tensor<LogCode>& t, const QuantParams& p) {
  Tensor<double> out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out.data()[i] = dequantize(t.data()[i], p);
  return out;
}

Tensor<LogCode> quantize_tensor(const Tensor<double>& t, const QuantParams& p) {
  Tensor<LogCode> out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out.data()[i] = log_quantize(t.data()[i], p);
  return out;
}

}  // namespace neuromax
