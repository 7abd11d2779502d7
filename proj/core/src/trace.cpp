// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <ostream>
#include <string>

#include "neuromax/dataflow.hpp"

namespace neuromax {

namespace {

// "13+17,16": 1-based psum indices, '+' inside one adder output, ',' between outputs.
std::string psum_groups(const MatrixTile& m, bool deferred) {
  std::string out;
  for (const auto& a : m.adder_net1) {
    if (deferred ? !a.deferred() : a.consume_lane < 0) continue;
    if (!out.empty()) out += ',';
    for (std::size_t i = 0; i < a.psums.size(); ++i) {
      if (i) out += '+';
      out += std::to_string(a.psums[i] + 1);
    }
  }
  return out.empty() ? "-" : out;
}

}  // namespace

void write_trace(std::ostream& os, const Schedule& s, std::string_view layer_name) {
  const auto& c = s.config();
  fmt::print(os, "# neuromax-trace 1\n");
  fmt::print(os, "# layer={} type={} kernel={} stride={} in={}x{}x{} out_c={} dataflow={} "
                 "cycles={} useful_ops={}\n",
             layer_name, to_string(c.type), c.kernel, c.stride, c.in_w, c.in_h, c.in_c, c.out_c,
             to_string(s.kind()), s.cycle_count(), s.useful_ops());
  fmt::print(os, "# cycle tile filter channel in_y in_x out_y out_x matrices ops defer consume\n");
  s.for_each_cycle([&](const TileCycle& t) {
    const auto& seg = *t.segment;
    std::string mask;
    const MatrixTile* first = nullptr;
    for (const auto& m : t.tile->matrices) {
      mask += m.active ? '1' : '0';
      if (m.active && !first) first = &m;
    }
    fmt::print(os, "{} {} {} {} {} {} {} {} {} {} {} {}\n", t.index, t.tile->label,
               seg.filter_base, seg.channel_base, seg.in_y, t.in_x(), seg.out_y, t.out_x(), mask,
               t.tile->useful_ops, first ? psum_groups(*first, true) : "-",
               first ? psum_groups(*first, false) : "-");
  });
}

}  // namespace neuromax
