// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "neuromax/layer_config.hpp"
#include "neuromax/quantizer.hpp"
#include "neuromax/tensor.hpp"

namespace neuromax {

// Brute-force convolution oracles. These deliberately share nothing with the
// dataflow or pe_core code paths: direct loops, no tiling, no LUT.

/// Direct valid convolution in extended precision. Weight layout as in
/// LayerConfig::weight_shape(). Throws ShapeError on inconsistent shapes.
Tensor<double> conv2d_oracle(const Tensor<double>& input, const Tensor<double>& weights, int kernel,
                             int stride, ConvType mode);

/// Same convolution over log codes with the accelerator's arithmetic: every
/// product is floor(|w * a| * 2^frac) (exact, not via a LUT), signed, and
/// saturated to the psum format; products are summed exactly and the sum is
/// clamped to the psum format once.
Tensor<std::int32_t> conv2d_quant_oracle(const Tensor<LogCode>& input, const Tensor<LogCode>& weights,
                                         const LayerConfig& cfg,
                                         const FixedFormat& psum_format = {16, 8},
                                         const QuantParams& p = {});

/// ReLU followed by nearest-code search over every exponent (ties to the
/// smaller code). Reference for post-processing.
Tensor<LogCode> relu_requantize_oracle(const Tensor<std::int32_t>& psums,
                                       const FixedFormat& psum_format = {16, 8},
                                       const QuantParams& p = {});

Tensor<double> dequantize_tensor(const Tensor<LogCode>& t, const QuantParams& p = {});
Tensor<LogCode> quantize_tensor(const Tensor<double>& t, const QuantParams& p = {});

}  // namespace neuromax
