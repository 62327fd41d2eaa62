#pragma once

// Deterministic synthetic inputs for tests: value-noise textures, Gaussian
// blob fields, homography warps, and HPatches-layout fixture directories.

#include <cstdint>
#include <string>

#include "detsift/core.hpp"
#include "detsift/geom.hpp"

namespace detsift::synth {

/// Hash-based multi-octave value noise in [0,1]; photo-like smooth texture.
GrayImage value_noise_image(int width, int height, uint64_t seed, int octaves = 4,
                            int base_cells = 8);

/// Adds an isotropic Gaussian of the given amplitude (may be negative).
void add_blob(GrayImage& img, double cx, double cy, double sigma, double amplitude);

/// Field of random blobs on a mid-gray background, clamped to [0,1].
GrayImage blob_field(int width, int height, uint64_t seed, int count);

/// Renders img warped by h (h maps source to target coordinates); target
/// pixels without source support take the background value.
GrayImage warp_image(const GrayImage& img, const Homography& h, int out_width,
                     int out_height, float background = 0.5f);

/// v -> gain * v^gamma + bias, clamped to [0,1].
GrayImage photometric(const GrayImage& img, double gamma, double gain, double bias);

/// Similarity transform about a center point.
Homography similarity(double angle_rad, double scale, double cx, double cy,
                      double tx = 0.0, double ty = 0.0);

/// Writes `count` HPatches-style illumination sequences (1..6.ppm and
/// identity H_1_2..H_1_6) under root/i_synthNN.
void make_illumination_fixture(const std::string& root, int count, int width, int height,
                               uint64_t seed);

}  // namespace detsift::synth
