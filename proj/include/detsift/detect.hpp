#pragma once

#include <optional>
#include <vector>

#include "detsift/core.hpp"
#include "detsift/scalespace.hpp"

namespace detsift {

/// A voxel that passed the contrast pre-gate and the strict 26-neighbour test.
struct RawExtremum {
    int octave = 0;
    int interval = 0;  // DoG level index, in [1, s]
    int row = 0;
    int col = 0;
    bool is_max = true;
};

/// Scans DoG stacks in canonical order (octave, interval, row, col). A voxel
/// qualifies iff |D| > 0.5 * contrast_threshold / s and it strictly dominates
/// all 26 neighbours; ties never qualify.
std::vector<RawExtremum> find_extrema(const ScaleSpace& ss, const SiftConfig& cfg,
                                      int workers = 1);

/// Iterative 3-D Taylor refinement via Cramer's rule, then contrast and
/// Hessian edge gates. Returns nullopt on rejection.
std::optional<Keypoint> refine_extremum(const ScaleSpace& ss, const RawExtremum& e,
                                        const SiftConfig& cfg);

/// find_extrema + refine_extremum over all candidates, candidate order kept.
std::vector<Keypoint> detect_keypoints(const ScaleSpace& ss, const SiftConfig& cfg,
                                       int workers = 1);

}  // namespace detsift
