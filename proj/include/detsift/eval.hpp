#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "detsift/core.hpp"
#include "detsift/geom.hpp"
#include "detsift/match.hpp"

namespace detsift {

/// A fraction that may be undefined (empty matches, zero denominator).
struct Fraction {
    double value = 0.0;
    bool defined = false;
};

/// Fraction of matches whose ground-truth reprojection error is within
/// threshold px. Empty match set -> value 0, defined = false.
Fraction mma(const MatchSet& matches, std::span<const Keypoint> kp_a,
             std::span<const Keypoint> kp_b, const Homography& h_gt, double threshold);

/// Greedy one-to-one repeatability: project kp_a into image b, keep in-bounds
/// projections, assign by ascending distance at the given radius, divide by
/// min(|projected in-bounds|, |kp_b|).
Fraction repeatability(std::span<const Keypoint> kp_a, std::span<const Keypoint> kp_b,
                       const Homography& h_gt, double threshold, int width_b,
                       int height_b);

struct HpatchesOptions {
    SiftConfig cfg;
    std::vector<double> thresholds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    float ratio = 0.8f;
    int magsac_iterations = 1500;
    double tau = 3.0;
    uint64_t seed = 1;
    int workers = 0;
};

struct PairResult {
    std::string sequence;
    int k = 0;  // target image index, 2..6
    int keypoints_a = 0;
    int keypoints_b = 0;
    int64_t mutual_matches = 0;
    std::vector<double> mma_at;  // aligned with options.thresholds
    Fraction repeatability3;
    bool estimation_ok = false;
    double corner_err = 0.0;  // valid when estimation_ok
};

struct HpatchesReport {
    HpatchesOptions options;
    std::vector<PairResult> pairs;            // sorted by (sequence, k)
    std::vector<std::string> failures;        // per-sequence load problems
    std::vector<double> mean_mma;             // aligned with options.thresholds
    double mean_repeatability = 0.0;
    double mean_corner_error = 0.0;           // over successful estimations only
    int estimation_failures = 0;
    int pair_count = 0;
};

/// Runs the per-pair protocol over every sequence directory under dir
/// (layout: 1..6.ppm/.pgm plus H_1_2..H_1_6). Missing files are recorded in
/// failures and the run continues.
HpatchesReport run_hpatches(const std::string& dir, const HpatchesOptions& options);

void write_report_json(const HpatchesReport& report, const std::string& path);
void write_report_csv(const HpatchesReport& report, const std::string& path);

}  // namespace detsift
