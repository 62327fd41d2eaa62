#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "detsift/core.hpp"

namespace detsift {

struct Match {
    int32_t a = -1;
    int32_t b = -1;
    float distance = 0.0f;
};

struct MatchSet {
    std::vector<Match> pairs;   // sorted by index a
    int64_t putative_a = 0;     // A->B candidates passing the ratio test
    int64_t putative_b = 0;     // B->A candidates passing the ratio test
};

/// Euclidean distance via ||x||^2 + ||y||^2 - 2 x.y with fixed-tree dot
/// products; negative round-off clamps to 0 before the square root.
float descriptor_distance(std::span<const float> a, std::span<const float> b);

/// Symmetric ratio test: nearest neighbour kept iff d1 < ratio * d2 in both
/// directions, then mutual-consistency filtering. Ties break to the lower
/// index. Fewer than 2 descriptors on either side yields an empty set.
MatchSet ratio_match(const FeatureSet& a, const FeatureSet& b, float ratio = 0.8f,
                     int workers = 1);

struct PcaProjection {
    int in_dim = 0;
    int out_dim = 0;
    std::vector<float> mean;   // in_dim
    std::vector<float> basis;  // row-major out_dim x in_dim, leading eigenvectors
};

/// Joint PCA over the concatenated descriptors of both sets. Throws
/// std::runtime_error naming the achievable rank when the covariance has
/// fewer than out_dim positive eigenvalues.
std::tuple<FeatureSet, FeatureSet, PcaProjection> pca_compress(const FeatureSet& a,
                                                               const FeatureSet& b,
                                                               int out_dim);

void write_matches(const MatchSet& matches, const std::string& path);
MatchSet read_matches(const std::string& path);

}  // namespace detsift
