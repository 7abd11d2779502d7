// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>

#include "neuromax/dataflow.hpp"
#include "neuromax/layer_config.hpp"
#include "neuromax/pe_core.hpp"
#include "neuromax/tensor.hpp"

namespace neuromax {

struct VerifyLimits {
  int max_spatial = 32;
  int max_channels = 18;
  int max_filters = 12;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  int trials = 100;
  VerifyLimits limits{};
  bool check_parallel = true;  // serial vs parallel determinism
  bool inject_fault = false;   // corrupt the wiring of every planned schedule
  bool minimize = true;        // shrink a failing config before reporting
};

struct Mismatch {
  int f = 0;
  int y = 0;
  int x = 0;
  std::int64_t got = 0;
  std::int64_t want = 0;
};

struct VerifyFailure {
  int trial = 0;
  LayerConfig cfg;
  std::string property;
  std::string detail;
  std::optional<Mismatch> where;
};

struct VerifyReport {
  int trials = 0;
  int passed = 0;
  std::optional<VerifyFailure> failure;  // first failure, minimized

  bool ok() const { return !failure; }
};

/// A random layer inside the limits (and the supported kernel/stride/type space).
LayerConfig random_layer(std::mt19937_64& rng, const VerifyLimits& lim);

/// Random codes; `zero_fraction` of elements are the zero code. Activations
/// are unsigned; exponents are drawn from [lo, hi].
Tensor<LogCode> random_codes(std::mt19937_64& rng, Shape s, bool signed_values, int lo, int hi,
                             double zero_fraction = 0.1);

/// First element where the tensors differ.
std::optional<Mismatch> first_mismatch(const Tensor<PsumWord>& got, const Tensor<PsumWord>& want);

/// Every (filter, channel, output, tap) product must be wired to its own
/// output exactly once, with input, weight and output coordinates agreeing.
/// Returns an empty string on success, else a description of the violation.
std::string check_coverage(const Schedule& s);

/// All properties for one layer and seed; nullopt on success.
std::optional<VerifyFailure> verify_layer(const LayerConfig& cfg, std::uint64_t data_seed,
                                          const VerifyOptions& opt);

/// Property-test driver over `opt.trials` random layers. Progress and the
/// failure (if any) go to `log` when given.
VerifyReport run_verify(const VerifyOptions& opt, std::ostream* log = nullptr);

std::string describe(const LayerConfig& cfg);

}  // namespace neuromax
