// SPDX-License-Identifier: Apache-2.0
#include "neuromax/descriptor.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "neuromax/errors.hpp"

namespace neuromax {

LayerConfig LayerEntry::config() const {
  return LayerConfig{kernel, stride, in_w + 2 * pad, in_h + 2 * pad, in_c, out_c, type};
}

std::array<int, 3> LayerEntry::chained_output() const {
  const LayerConfig c = config();
  return {c.out_w() / pool, c.out_h() / pool, out_c};
}

std::vector<NamedLayer> NetworkDescriptor::named_layers() const {
  std::vector<NamedLayer> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back({l.name, l.config()});
  return out;
}

namespace {

int parse_int(std::string_view v, std::string_view key, int line) {
  int out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) {
    throw ParseError("bad integer '" + std::string(v) + "' for " + std::string(key), line);
  }
  return out;
}

void parse_dims(std::string_view v, LayerEntry& e, int line) {
  const auto x1 = v.find('x');
  const auto x2 = x1 == std::string_view::npos ? x1 : v.find('x', x1 + 1);
  if (x2 == std::string_view::npos) throw ParseError("in= expects WxHxC", line);
  e.in_w = parse_int(v.substr(0, x1), "in width", line);
  e.in_h = parse_int(v.substr(x1 + 1, x2 - x1 - 1), "in height", line);
  e.in_c = parse_int(v.substr(x2 + 1), "in channels", line);
}

}  // namespace

NetworkDescriptor parse_descriptor(std::istream& is) {
  NetworkDescriptor d;
  std::string raw;
  int line = 0;
  bool header = false;
  std::set<std::string> names;
  while (std::getline(is, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (!header) {
      if (tok.size() != 2 || tok[0] != "neuromax-net") {
        throw ParseError("expected header 'neuromax-net " + std::to_string(kDescriptorVersion) + "'",
                         line);
      }
      if (parse_int(tok[1], "version", line) != kDescriptorVersion) {
        throw ParseError("unsupported descriptor version " + tok[1], line);
      }
      header = true;
      continue;
    }
    if (tok.size() < 2) throw ParseError("expected '<name> <type> key=value ...'", line);
    LayerEntry e;
    e.line = line;
    e.name = tok[0];
    if (!names.insert(e.name).second) throw ParseError("duplicate layer name '" + e.name + "'", line);
    try {
      e.type = parse_conv_type(tok[1]);
    } catch (const ParseError& err) {
      throw ParseError(err.what(), line);
    }
    std::set<std::string> seen;
    for (std::size_t i = 2; i < tok.size(); ++i) {
      const auto eq = tok[i].find('=');
      if (eq == std::string::npos || eq == 0) throw ParseError("expected key=value, got '" + tok[i] + "'", line);
      const std::string key = tok[i].substr(0, eq);
      const std::string_view val = std::string_view(tok[i]).substr(eq + 1);
      if (!seen.insert(key).second) throw ParseError("duplicate key '" + key + "'", line);
      if (key == "kernel") e.kernel = parse_int(val, key, line);
      else if (key == "stride") e.stride = parse_int(val, key, line);
      else if (key == "in") parse_dims(val, e, line);
      else if (key == "out_c") e.out_c = parse_int(val, key, line);
      else if (key == "pad") e.pad = parse_int(val, key, line);
      else if (key == "pool") e.pool = parse_int(val, key, line);
      else if (key == "from") e.from = std::string(val);
      else throw ParseError("unknown key '" + key + "'", line);
    }
    for (const char* req : {"kernel", "in", "out_c"}) {
      if (!seen.count(req)) throw ParseError(std::string("missing ") + req + "=", line);
    }
    if (e.pad < 0 || e.pool < 1) throw ParseError("pad must be >= 0 and pool >= 1", line);
    if (!e.from.empty() && !names.count(e.from)) {
      throw ParseError("from= names unknown layer '" + e.from + "'", line);
    }
    if (e.from == e.name) throw ParseError("layer reads its own output", line);
    try {
      e.config().validate();
    } catch (const ConfigError& err) {
      throw ParseError(err.what(), line);
    }
    d.layers.push_back(std::move(e));
  }
  if (!header) throw ParseError("empty descriptor (missing header)", line);
  if (d.layers.empty()) throw ParseError("descriptor has no layers", line);
  check_chain(d);
  return d;
}

NetworkDescriptor parse_descriptor_string(const std::string& text) {
  std::istringstream is(text);
  return parse_descriptor(is);
}

NetworkDescriptor load_descriptor(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw IoError("cannot open " + p.string());
  return parse_descriptor(f);
}

void check_chain(const NetworkDescriptor& d) {
  std::map<std::string, std::array<int, 3>> outputs;
  const LayerEntry* prev = nullptr;
  for (const auto& l : d.layers) {
    const LayerEntry* src = prev;
    std::array<int, 3> want{};
    bool have = false;
    if (!l.from.empty()) {
      const auto it = outputs.find(l.from);
      if (it == outputs.end()) throw ShapeError("line " + std::to_string(l.line) + ": unknown from=" + l.from);
      want = it->second;
      have = true;
    } else if (src) {
      want = src->chained_output();
      have = true;
    }
    if (have && (want[0] != l.in_w || want[1] != l.in_h || want[2] != l.in_c)) {
      throw ShapeError("line " + std::to_string(l.line) + ": layer " + l.name + " expects " +
                       std::to_string(l.in_w) + "x" + std::to_string(l.in_h) + "x" +
                       std::to_string(l.in_c) + " but receives " + std::to_string(want[0]) + "x" +
                       std::to_string(want[1]) + "x" + std::to_string(want[2]));
    }
    outputs[l.name] = l.chained_output();
    prev = &l;
  }
}

void write_descriptor(std::ostream& os, const NetworkDescriptor& d) {
  os << "neuromax-net " << kDescriptorVersion << "\n";
  for (const auto& l : d.layers) {
    os << l.name << ' ' << to_string(l.type) << " kernel=" << l.kernel << " stride=" << l.stride
       << " in=" << l.in_w << 'x' << l.in_h << 'x' << l.in_c << " out_c=" << l.out_c
       << " pad=" << l.pad;
    if (l.pool != 1) os << " pool=" << l.pool;
    if (!l.from.empty()) os << " from=" << l.from;
    os << '\n';
  }
}

std::string serialize_descriptor(const NetworkDescriptor& d) {
  std::ostringstream os;
  write_descriptor(os, d);
  return os.str();
}

}  // namespace neuromax
