// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "neuromax/tensor.hpp"

namespace neuromax {

enum class ConvType { standard, depthwise, pointwise };

std::string_view to_string(ConvType t);
/// Throws ParseError for unknown names.
ConvType parse_conv_type(std::string_view s);

/// One convolution layer as seen by the state controller. Valid convolution:
/// any padding has already been applied to in_w / in_h.
struct LayerConfig {
  int kernel = 3;
  int stride = 1;
  int in_w = 0;
  int in_h = 0;
  int in_c = 0;
  int out_c = 0;
  ConvType type = ConvType::standard;

  int out_w() const { return (in_w - kernel) / stride + 1; }
  int out_h() const { return (in_h - kernel) / stride + 1; }

  /// Multiply-accumulates of the layer, one op per MAC.
  std::uint64_t macs() const;

  Shape input_shape() const { return {1, in_c, in_h, in_w}; }
  /// Standard/pointwise: out_c x in_c x k x k. Depthwise: in_c x 1 x k x k.
  Shape weight_shape() const;
  Shape output_shape() const { return {1, out_c, out_h(), out_w()}; }

  /// Throws ConfigError on unsupported kernel/stride/type combinations.
  void validate() const;

  friend bool operator==(const LayerConfig&, const LayerConfig&) = default;
};

}  // namespace neuromax
