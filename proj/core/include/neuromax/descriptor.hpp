// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "neuromax/layer_config.hpp"
#include "neuromax/metrics.hpp"

namespace neuromax {

// .net network descriptor. Line oriented, '#' starts a comment:
//
//   neuromax-net 1
//   conv1_1 standard kernel=3 stride=1 in=224x224x3 out_c=64 pad=1
//   conv1_2 standard kernel=3 stride=1 in=224x224x64 out_c=64 pad=1 pool=2
//
// `in` is W x H x C before padding. `pool=2` halves the output before the
// next layer (pooling itself is not simulated). `from=<name>` makes the
// layer read the output of an earlier layer instead of the previous one.

inline constexpr int kDescriptorVersion = 1;

struct LayerEntry {
  std::string name;
  ConvType type = ConvType::standard;
  int kernel = 3;
  int stride = 1;
  int in_w = 0;
  int in_h = 0;
  int in_c = 0;
  int out_c = 0;
  int pad = 0;
  int pool = 1;
  std::string from;
  int line = 0;  // source line, 0 when built in code

  /// Layer as the core sees it, with padding applied.
  LayerConfig config() const;
  /// Output dims after the optional pooling step: {w, h, c}.
  std::array<int, 3> chained_output() const;

  bool operator==(const LayerEntry& o) const {
    return name == o.name && type == o.type && kernel == o.kernel && stride == o.stride &&
           in_w == o.in_w && in_h == o.in_h && in_c == o.in_c && out_c == o.out_c &&
           pad == o.pad && pool == o.pool && from == o.from;
  }
};

struct NetworkDescriptor {
  std::vector<LayerEntry> layers;

  std::vector<NamedLayer> named_layers() const;
  bool operator==(const NetworkDescriptor& o) const { return layers == o.layers; }
};

/// Throws ParseError (with line numbers) on syntax errors and ShapeError when
/// successive layers do not chain.
NetworkDescriptor parse_descriptor(std::istream& is);
NetworkDescriptor parse_descriptor_string(const std::string& text);
NetworkDescriptor load_descriptor(const std::filesystem::path& p);

/// Shape-chain check; throws ShapeError naming the offending line.
void check_chain(const NetworkDescriptor& d);

void write_descriptor(std::ostream& os, const NetworkDescriptor& d);
std::string serialize_descriptor(const NetworkDescriptor& d);

}  // namespace neuromax
