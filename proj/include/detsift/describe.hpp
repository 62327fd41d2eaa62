#pragma once

#include <span>
#include <vector>

#include "detsift/core.hpp"
#include "detsift/scalespace.hpp"

namespace detsift {

inline constexpr int kDescriptorCells = 4;   // 4x4 spatial grid
inline constexpr int kDescriptorOrients = 8; // orientation bins per cell
inline constexpr int kDescriptorDim = kDescriptorCells * kDescriptorCells * kDescriptorOrients;

/// Unnormalized 4x4x8 gradient histogram at one support scale. The window is
/// an integer lattice in the keypoint's rotated frame; intensities come from
/// bilinear samples of the nearest Gaussian level and gradients from central
/// differences of those samples at unit spacing.
std::vector<float> raw_descriptor(const ScaleSpace& ss, const Keypoint& kp,
                                  double scale_factor, const SiftConfig& cfg,
                                  int workers = 1);

/// Mean of raw descriptors over cfg.dsp_scales, then the normalization chain
/// L2 -> clip -> L2 -> RootSIFT. Nonzero outputs have unit L2 norm.
std::vector<float> dsp_descriptor(const ScaleSpace& ss, const Keypoint& kp,
                                  const SiftConfig& cfg, int workers = 1);

/// L1-normalize then element-wise square root, in place. Zero stays zero.
/// Throws std::invalid_argument on a negative component.
void root_sift(std::span<float> v);

}  // namespace detsift
