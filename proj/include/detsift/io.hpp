#pragma once

#include <string>

#include "detsift/core.hpp"

namespace detsift {

/// Decodes binary PGM (P5) or PPM (P6), 8-bit, maxval 255. Color converts to
/// gray as 0.299 R + 0.587 G + 0.114 B; values scale by 1/255.
GrayImage load_image(const std::string& path);

/// Writes an 8-bit binary PGM / PPM (gray replicated to three channels).
void write_pgm(const GrayImage& img, const std::string& path);
void write_ppm(const GrayImage& img, const std::string& path);

/// Full pipeline: scale space, extrema, refinement, orientations, DSP
/// descriptors, canonical sort. Bitwise deterministic for any worker count.
FeatureSet extract(const GrayImage& img, const SiftConfig& cfg, int workers = 1);

}  // namespace detsift
