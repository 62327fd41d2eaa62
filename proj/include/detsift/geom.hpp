#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace detsift {

/// 3x3 projective transform, double precision, normalized so h[8] = 1 when
/// |h[8]| > 1e-12, otherwise unit Frobenius norm.
struct Homography {
    std::array<double, 9> h = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    double operator()(int r, int c) const { return h[size_t(r) * 3 + c]; }
    double& operator()(int r, int c) { return h[size_t(r) * 3 + c]; }

    /// Projects (x, y); throws std::runtime_error if the image is at infinity.
    void apply(double x, double y, double& ox, double& oy) const;
    double det() const;
    Homography inverse() const;  // throws on a singular matrix
    void normalize();
};

struct Correspondence {
    double x1 = 0, y1 = 0;  // source point
    double x2 = 0, y2 = 0;  // target point
};

/// Minimal deterministic PRNG (splitmix64); platform RNGs are never used.
struct SplitMix64 {
    uint64_t state;
    explicit SplitMix64(uint64_t seed) : state(seed) {}
    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
};

/// Normalized DLT (Hartley scaling on both sides, smallest eigenvector of
/// AtA). Optional per-correspondence row weights. Throws std::runtime_error
/// on degenerate input (coincident or 3-collinear points in minimal samples,
/// or a rank-deficient system).
Homography dlt_homography(std::span<const Correspondence> pairs,
                          std::span<const double> weights = {});

struct MagsacResult {
    bool success = false;
    Homography h;
    std::vector<uint8_t> inlier_mask;  // from the refit model at threshold tau
    double score = 0.0;                // winning hypothesis score
    int best_iteration = -1;
};

/// Seeded hypothesis-and-verify homography estimation with the soft
/// truncated-quadratic score sum(max(0, 1 - r^2/tau^2)); r is the symmetric
/// transfer error. Deterministic for a fixed seed regardless of worker count.
MagsacResult magsac_lite(std::span<const Correspondence> matches, int iterations,
                         double tau, uint64_t seed, int workers = 1);

/// Mean displacement of the four image corners under h_est vs h_gt.
double corner_error(const Homography& h_est, const Homography& h_gt, double width,
                    double height);

void write_homography(const Homography& h, const std::string& path);
Homography read_homography(const std::string& path);

}  // namespace detsift
