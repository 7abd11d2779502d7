// SPDX-License-Identifier: Apache-2.0
#include "neuromax/layer_config.hpp"

#include <string>

#include "neuromax/errors.hpp"

namespace neuromax {

std::string_view to_string(ConvType t) {
  switch (t) {
    case ConvType::standard: return "standard";
    case ConvType::depthwise: return "depthwise";
    case ConvType::pointwise: return "pointwise";
  }
  return "?";
}

ConvType parse_conv_type(std::string_view s) {
  if (s == "standard") return ConvType::standard;
  if (s == "depthwise") return ConvType::depthwise;
  if (s == "pointwise") return ConvType::pointwise;
  throw ParseError("unknown conv type '" + std::string(s) + "'");
}

std::uint64_t LayerConfig::macs() const {
  const std::uint64_t spatial = static_cast<std::uint64_t>(out_w()) * static_cast<std::uint64_t>(out_h());
  const std::uint64_t taps = static_cast<std::uint64_t>(kernel) * static_cast<std::uint64_t>(kernel);
  if (type == ConvType::depthwise) return spatial * taps * static_cast<std::uint64_t>(in_c);
  return spatial * taps * static_cast<std::uint64_t>(in_c) * static_cast<std::uint64_t>(out_c);
}

Shape LayerConfig::weight_shape() const {
  if (type == ConvType::depthwise) return {in_c, 1, kernel, kernel};
  return {out_c, in_c, kernel, kernel};
}

void LayerConfig::validate() const {
  const std::string where = "layer " + std::to_string(kernel) + "x" + std::to_string(kernel) +
                            " s" + std::to_string(stride) + ": ";
  if (kernel != 1 && kernel != 3 && kernel != 4 && kernel != 5) {
    throw ConfigError(where + "unsupported kernel size (supported: 1, 3, 4, 5)");
  }
  if (stride != 1 && stride != 2) throw ConfigError(where + "unsupported stride (supported: 1, 2)");
  if (in_c < 1 || out_c < 0) throw ConfigError(where + "channel counts must be positive");
  if (in_w < kernel || in_h < kernel) throw ConfigError(where + "input smaller than the kernel");
  if (type == ConvType::pointwise && kernel != 1) throw ConfigError(where + "pointwise requires kernel 1");
  if (type == ConvType::depthwise) {
    if (kernel != 3) throw ConfigError(where + "depthwise is supported for 3x3 kernels only");
    if (out_c != in_c) throw ConfigError(where + "depthwise requires out_c == in_c");
  }
}

}  // namespace neuromax
