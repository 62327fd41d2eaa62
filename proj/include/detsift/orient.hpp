#pragma once

#include <vector>

#include "detsift/core.hpp"
#include "detsift/scalespace.hpp"

namespace detsift {

/// Index of the Gaussian level whose blur is nearest to sigma_rel on the
/// octave grid; ties to the lower index.
int nearest_gauss_level(const ScaleSpace& ss, double sigma_rel);

/// Raw 36-bin gradient-orientation histogram around kp (before smoothing).
/// Exposed for oracle tests.
std::vector<float> orientation_histogram(const ScaleSpace& ss, const Keypoint& kp,
                                         const SiftConfig& cfg, int workers = 1);

/// Circular [1/4, 1/2, 1/4] smoothing, fixed number of passes.
std::vector<float> smooth_histogram_circular(const std::vector<float>& hist, int passes);

/// Emits one keypoint copy per dominant orientation peak (angle in [0, 2pi)).
/// A gradient-free window yields a single copy with angle 0.
std::vector<Keypoint> assign_orientations(const ScaleSpace& ss, const Keypoint& kp,
                                          const SiftConfig& cfg, int workers = 1);

}  // namespace detsift
