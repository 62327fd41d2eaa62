#pragma once

#include <span>
#include <vector>

#include "detsift/core.hpp"

namespace detsift {

/// Gaussian pyramid plus per-octave DoG stacks. Octave o holds s+3 Gaussian
/// levels and s+2 DoG levels at half the previous octave's resolution; the
/// blur of level i on an octave's own grid is sigma0 * 2^(i/s).
struct ScaleSpace {
    struct Octave {
        std::vector<GrayImage> gauss;
        std::vector<GrayImage> dog;
    };
    std::vector<Octave> octaves;
    int intervals = 3;       // s
    float sigma0 = 1.6f;
    bool upsampled = false;  // base image was 2x-upsampled

    /// Blur of level i relative to the octave's own pixel grid.
    double level_sigma(int interval) const;
    /// Multiply octave-grid coordinates by this to reach original-image px.
    double octave_to_input_scale(int octave) const;
};

/// Whether build_scale_space will 2x-upsample this input under cfg.
bool will_upsample(const GrayImage& img, const SiftConfig& cfg);

/// Normalized 1-D Gaussian, radius ceil(4*sigma), length 2*radius+1.
std::vector<float> gaussian_kernel(double sigma);

/// Horizontal-then-vertical pass with reflect-101 borders. Taps accumulate
/// left-to-right per pixel, so the output is bitwise reproducible for any
/// worker count.
GrayImage convolve_separable(const GrayImage& img, std::span<const float> kernel,
                             int workers = 1);

/// Bilinear 2x upsampling at exact half-pixel sample positions.
GrayImage upsample2x(const GrayImage& img);

/// Keeps even-indexed rows/columns; dimensions halve with floor.
GrayImage decimate2x(const GrayImage& img);

ScaleSpace build_scale_space(const GrayImage& img, const SiftConfig& cfg, int workers = 1);

}  // namespace detsift
