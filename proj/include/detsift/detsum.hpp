#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "detsift/core.hpp"

namespace detsift::detsum {

// Every floating-point reduction in the toolkit goes through the fixed
// binary-tree fold below: leaf i pairs with leaf i+1 for even i, recursively
// on partial sums, odd tail promoted unchanged. The combine order is a pure
// function of the leaf count, so results are bitwise identical across runs
// and worker counts. Combines run in double precision and the result is
// rounded to the leaf type once at the end.

/// Fixed-tree sum of a float sequence. Empty input returns exact 0.0f.
/// workers > 1 reduces aligned leaf blocks concurrently; the value is
/// bitwise identical to the single-worker result.
float tree_sum(std::span<const float> values, int workers = 1);

/// Double-precision twin with the same pairing tree.
double tree_sum(std::span<const double> values, int workers = 1);

struct Contribution {
    int32_t bin;
    float weight;
};

/// Scatter-accumulate: bin b of the result equals tree_sum over the weights
/// with bin==b in their original (canonical) order. Throws std::out_of_range
/// on a bin index outside [0, bin_count). The worker count never changes the
/// result; it selects the partition used by the test-only nondeterminism hook.
std::vector<float> tree_accumulate_histogram(std::span<const Contribution> contributions,
                                             int bin_count, int workers = 1);

/// Test hook: true when the library was built with DETSIFT_NONDET_TEST_HOOK
/// and the environment sets DETSIFT_NONDET=1. In that mode histogram
/// accumulation degrades to per-worker left folds, deliberately breaking the
/// reproducibility contract so determinism harnesses have a negative control.
bool nondeterministic_mode();

std::string sha256_hex(std::span<const uint8_t> bytes);

/// SHA-256 of the serialized feature stream (write_features byte layout).
std::string hash_features(const FeatureSet& features);

}  // namespace detsift::detsum
