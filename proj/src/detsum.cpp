#include "detsift/detsum.hpp"

#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "detsift/parallel.hpp"

namespace detsift::detsum {

namespace {

// Aligned block size for concurrent leaf reduction. Any power of two works:
// tree nodes cover aligned power-of-two leaf ranges, so a block's subtree is
// a pure function of its own leaves and the merge continues the same tree.
constexpr size_t kBlock = 1024;

// In-place pairwise reduction of scratch[0..n) to scratch[0].
double reduce_pairwise(double* scratch, size_t n) {
    while (n > 1) {
        const size_t half = n / 2;
        for (size_t j = 0; j < half; ++j) scratch[j] = scratch[2 * j] + scratch[2 * j + 1];
        if (n & 1) {
            scratch[half] = scratch[n - 1];
            n = half + 1;
        } else {
            n = half;
        }
    }
    return scratch[0];
}

template <typename T>
double reduce_block(const T* values, size_t n) {
    double scratch[kBlock];
    for (size_t i = 0; i < n; ++i) scratch[i] = static_cast<double>(values[i]);
    return reduce_pairwise(scratch, n);
}

template <typename T>
double tree_sum_impl(std::span<const T> values, int workers) {
    const size_t n = values.size();
    if (n == 0) return 0.0;
    const size_t blocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partials(blocks);
    workers = resolve_workers(workers);
    if (workers > 1 && blocks > 1) {
        parallel_for(static_cast<int64_t>(blocks), workers, [&](int64_t lo, int64_t hi) {
            for (int64_t b = lo; b < hi; ++b) {
                const size_t begin = static_cast<size_t>(b) * kBlock;
                partials[b] = reduce_block(values.data() + begin, std::min(kBlock, n - begin));
            }
        });
    } else {
        for (size_t b = 0; b < blocks; ++b) {
            const size_t begin = b * kBlock;
            partials[b] = reduce_block(values.data() + begin, std::min(kBlock, n - begin));
        }
    }
    return reduce_pairwise(partials.data(), blocks);
}

}  // namespace

float tree_sum(std::span<const float> values, int workers) {
    return static_cast<float>(tree_sum_impl(values, workers));
}

double tree_sum(std::span<const double> values, int workers) {
    return tree_sum_impl(values, workers);
}

bool nondeterministic_mode() {
#ifdef DETSIFT_NONDET_TEST_HOOK
    static const bool enabled = [] {
        const char* v = std::getenv("DETSIFT_NONDET");
        return v != nullptr && v[0] == '1';
    }();
    return enabled;
#else
    return false;
#endif
}

std::vector<float> tree_accumulate_histogram(std::span<const Contribution> contributions,
                                             int bin_count, int workers) {
    if (bin_count <= 0) throw std::invalid_argument("histogram: bin_count must be > 0");
    for (const auto& c : contributions) {
        if (c.bin < 0 || c.bin >= bin_count)
            throw std::out_of_range("histogram: bin index out of range");
    }

    if (nondeterministic_mode()) {
        // Deliberately order-fragile path: per-worker float left folds merged
        // in partition order, so the value depends on the worker count.
        workers = resolve_workers(workers);
        const size_t n = contributions.size();
        const size_t chunk = workers > 0 ? (n + workers - 1) / workers : n;
        std::vector<float> hist(bin_count, 0.0f);
        for (int w = 0; w < workers && chunk > 0; ++w) {
            const size_t begin = static_cast<size_t>(w) * chunk;
            const size_t end = std::min(n, begin + chunk);
            std::vector<float> local(bin_count, 0.0f);
            for (size_t i = begin; i < end; ++i)
                local[contributions[i].bin] += contributions[i].weight;
            for (int b = 0; b < bin_count; ++b) hist[b] += local[b];
        }
        return hist;
    }

    // Stable counting-sort scatter keeps each bin's weights in canonical
    // order; per-bin totals then follow the fixed tree.
    std::vector<size_t> counts(bin_count, 0);
    for (const auto& c : contributions) ++counts[c.bin];
    std::vector<size_t> offsets(bin_count + 1, 0);
    for (int b = 0; b < bin_count; ++b) offsets[b + 1] = offsets[b] + counts[b];
    std::vector<float> bucketed(contributions.size());
    std::vector<size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const auto& c : contributions) bucketed[cursor[c.bin]++] = c.weight;

    std::vector<float> hist(bin_count, 0.0f);
    for (int b = 0; b < bin_count; ++b) {
        hist[b] = tree_sum(
            std::span<const float>(bucketed.data() + offsets[b], counts[b]));
    }
    return hist;
}

std::string hash_features(const FeatureSet& features) {
    const std::vector<uint8_t> bytes = serialize_features(features);
    return sha256_hex(bytes);
}

}  // namespace detsift::detsum
