// SPDX-License-Identifier: Apache-2.0
// neuromax: quantize tensors, simulate networks, run the property checks.
#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>

#include "neuromax/descriptor.hpp"
#include "neuromax/errors.hpp"
#include "neuromax/grid.hpp"
#include "neuromax/metrics.hpp"
#include "neuromax/reference.hpp"
#include "neuromax/tensor_io.hpp"
#include "neuromax/verify.hpp"

namespace fs = std::filesystem;
using namespace neuromax;

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kParse = 2,
  kShape = 3,
  kVerify = 4,
  kConfig = 5,
  kIo = 6,
  kUsage = 64,
};

struct VerifyFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QuantizeArgs {
  std::string input;
  std::string output;
  int m = 5;
  int n = 1;
};

int cmd_quantize(const QuantizeArgs& a) {
  QuantParams p{a.m, a.n, std::exp2(std::ldexp(1.0, -a.n))};
  p.validate();
  const Tensor<double> in = load_real_tensor(a.input);
  const Tensor<LogCode> codes = quantize_tensor(in, p);
  save_tensor(a.output, codes);

  std::vector<double> nonzero;
  for (double v : in.data()) {
    if (v != 0.0) nonzero.push_back(v);
  }
  QuantErrorStats st;
  if (!nonzero.empty()) st = quant_error_stats(nonzero, p);
  fmt::print("quantized {} elements ({} nonzero) with m={} n={}\n", in.size(), nonzero.size(), p.int_bits,
             p.frac_bits);
  fmt::print("max_rel_err {:.6f}\nmean_rel_err {:.6f}\n", st.max_rel_err, st.mean_rel_err);
  return kOk;
}

struct SimulateArgs {
  std::string descriptor;
  std::string weights_dir;
  std::string input;
  std::string csv;
  std::string trace_dir;
  double clock_mhz = 200.0;
  double sram_kb = 0.0;
  std::uint64_t seed = 1;
  bool verify = false;
  bool parallel = false;
};

Tensor<LogCode> load_codes(const fs::path& p, const QuantParams& q) {
  return peek_tensor_kind(p) == TensorKind::real ? quantize_tensor(load_real_tensor(p), q)
                                                 : load_logcode_tensor(p);
}

Tensor<LogCode> pad_codes(const Tensor<LogCode>& t, int pad) {
  if (pad == 0) return t;
  const Shape& s = t.shape();
  Tensor<LogCode> out(Shape{1, s.c, s.h + 2 * pad, s.w + 2 * pad});
  for (int c = 0; c < s.c; ++c) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) out.at(c, y + pad, x + pad) = t.at(c, y, x);
    }
  }
  return out;
}

void check_against_oracle(const std::string& name, const LayerConfig& cfg, const Tensor<LogCode>& in,
                          const Tensor<LogCode>& w, const Tensor<PsumWord>& psums) {
  const auto want = conv2d_quant_oracle(in, w, cfg);
  if (auto mm = first_mismatch(psums, want)) {
    throw VerifyFailed(fmt::format("layer {}: psum mismatch at filter {} y {} x {}: got {} want {}",
                                   name, mm->f, mm->y, mm->x, mm->got, mm->want));
  }
}

int cmd_simulate(const SimulateArgs& a) {
  const NetworkDescriptor net = load_descriptor(a.descriptor);
  CoreConfig cc;
  cc.clock_hz = a.clock_mhz * 1e6;
  if (!(cc.clock_hz > 0.0)) throw ConfigError("--clock-mhz must be positive");
  if (a.sram_kb > 0.0) cc.sram = SramModel::split(static_cast<std::uint64_t>(a.sram_kb * 1024.0));
  cc.parallel = a.parallel;
  const bool execute = !a.input.empty() || !a.weights_dir.empty() || a.verify;
  if (!a.trace_dir.empty()) fs::create_directories(a.trace_dir);

  std::vector<LayerMetrics> metrics;
  if (!execute) {
    for (const auto& l : net.layers) {
      const Schedule s = plan_layer(l.config());
      metrics.push_back(measure(s, cc.clock_hz, l.name, tile_for_sram(l.config(), cc.sram).ddr_bytes()));
      if (!a.trace_dir.empty()) {
        std::ofstream f(fs::path(a.trace_dir) / (l.name + ".trace"));
        write_trace(f, s, l.name);
      }
    }
  } else {
    // With an input tensor the layers chain; otherwise each layer gets its
    // own seeded random tensors.
    const ConvCore core(cc);
    std::mt19937_64 rng(a.seed);
    std::map<std::string, Tensor<LogCode>> outputs;
    const LayerEntry* prev = nullptr;
    bool chained = !a.input.empty();
    Tensor<LogCode> current = chained ? load_codes(a.input, cc.quant) : Tensor<LogCode>{};
    for (const auto& l : net.layers) {
      const LayerConfig cfg = l.config();
      Tensor<LogCode> src;
      if (chained) {
        if (prev && prev->pool != 1 && l.from.empty()) {
          throw ConfigError("layer " + l.name + ": pooling between layers is not simulated");
        }
        src = l.from.empty() ? current : outputs.at(l.from);
        const Shape want{1, l.in_c, l.in_h, l.in_w};
        if (!(src.shape() == want)) {
          throw ShapeError("layer " + l.name + ": input " + src.shape().str() + ", expected " + want.str());
        }
        src = pad_codes(src, l.pad);
      } else {
        src = random_codes(rng, cfg.input_shape(), false, -12, 6);
      }
      Tensor<LogCode> w;
      const fs::path wfile = fs::path(a.weights_dir) / (l.name + ".tns");
      if (!a.weights_dir.empty() && fs::exists(wfile)) {
        w = load_codes(wfile, cc.quant);
        if (!(w.shape() == cfg.weight_shape())) {
          throw ShapeError("layer " + l.name + ": weights " + w.shape().str() + ", expected " +
                           cfg.weight_shape().str());
        }
      } else if (!a.weights_dir.empty()) {
        throw IoError("missing weight file " + wfile.string());
      } else {
        w = random_codes(rng, cfg.weight_shape(), true, -14, 3);
      }
      const Schedule s = plan_layer(cfg);
      LayerResult r = core.run_schedule(s, src, w);
      r.metrics.name = l.name;
      if (a.verify) check_against_oracle(l.name, cfg, src, w, r.psums);
      if (!a.trace_dir.empty()) {
        std::ofstream f(fs::path(a.trace_dir) / (l.name + ".trace"));
        write_trace(f, s, l.name);
      }
      metrics.push_back(r.metrics);
      if (chained) {
        outputs[l.name] = r.output;
        current = std::move(r.output);
      }
      prev = &l;
    }
    if (a.verify) fmt::print("verify: all {} layers match the oracle\n", net.layers.size());
  }

  const NetworkReport rep = summarize(std::move(metrics), cc.clock_hz);
  write_summary(std::cout, rep);
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw IoError("cannot write " + a.csv);
    write_csv(f, rep);
  }
  return kOk;
}

int cmd_verify(const VerifyOptions& opt) {
  const VerifyReport rep = run_verify(opt, &std::cout);
  if (rep.ok()) return kOk;
  const auto& f = *rep.failure;
  if (f.where) {
    fmt::print(std::cerr, "verification failed: {} at filter {} y {} x {} [{}]\n", f.property, f.where->f,
               f.where->y, f.where->x, describe(f.cfg));
  } else {
    fmt::print(std::cerr, "verification failed: {} [{}]\n", f.property, describe(f.cfg));
  }
  return kVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cycle-level simulator of a log-quantized CNN accelerator"};
  app.require_subcommand(1);

  QuantizeArgs qa;
  auto* q = app.add_subcommand("quantize", "Log-quantize a real-valued .tns tensor");
  q->add_option("input", qa.input, "Real-valued tensor")->required()->check(CLI::ExistingFile);
  q->add_option("-o,--output", qa.output, "Output log-code tensor")->required();
  q->add_option("--int-bits", qa.m, "Integer bits of the code (m)");
  q->add_option("--frac-bits", qa.n, "Fraction bits of the code (n)");

  SimulateArgs sa;
  auto* s = app.add_subcommand("simulate", "Run a .net descriptor through the core");
  s->add_option("descriptor", sa.descriptor, "Network descriptor")->required()->check(CLI::ExistingFile);
  s->add_option("--weights", sa.weights_dir, "Directory of <layer>.tns weight tensors")
      ->check(CLI::ExistingDirectory);
  s->add_option("--input", sa.input, "Input tensor for the first layer (unpadded)")->check(CLI::ExistingFile);
  s->add_option("--csv", sa.csv, "Write the per-layer report as CSV");
  s->add_option("--trace", sa.trace_dir, "Write one schedule trace per layer into this directory");
  s->add_option("--clock-mhz", sa.clock_mhz, "Core clock in MHz")->capture_default_str();
  s->add_option("--sram-kb", sa.sram_kb, "Total on-chip SRAM in KiB (default 3.8 Mb)");
  s->add_option("--seed", sa.seed, "Seed for generated tensors")->capture_default_str();
  s->add_flag("--verify", sa.verify, "Check every layer against the convolution oracle");
  s->add_flag("--parallel", sa.parallel, "Evaluate the six matrices on separate threads");

  VerifyOptions va;
  auto* v = app.add_subcommand("verify", "Randomized oracle-equivalence and invariant checks");
  v->add_option("--seed", va.seed, "Random seed")->capture_default_str();
  v->add_option("--trials", va.trials, "Number of random layers")->capture_default_str();
  v->add_flag("--inject-fault", va.inject_fault, "Corrupt the adder wiring (the check must fail)");
  v->add_flag("!--no-minimize", va.minimize, "Report the failing layer as found");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*q) return cmd_quantize(qa);
    if (*s) return cmd_simulate(sa);
    if (*v) return cmd_verify(va);
  } catch (const ParseError& e) {
    fmt::print(std::cerr, "parse error: {}\n", e.what());
    return kParse;
  } catch (const ShapeError& e) {
    fmt::print(std::cerr, "shape error: {}\n", e.what());
    return kShape;
  } catch (const VerifyFailed& e) {
    fmt::print(std::cerr, "verification failed: {}\n", e.what());
    return kVerify;
  } catch (const ConfigError& e) {
    fmt::print(std::cerr, "configuration error: {}\n", e.what());
    return kConfig;
  } catch (const IoError& e) {
    fmt::print(std::cerr, "I/O error: {}\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return kInternal;
  }
  return kInternal;
}
