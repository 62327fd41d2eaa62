#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace detsift {

/// Single-channel row-major image, values in [0,1], single precision.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    GrayImage() = default;
    GrayImage(int w, int h, float fill = 0.0f)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    float& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    float at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
    const float* row(int y) const { return data.data() + static_cast<size_t>(y) * width; }
    float* row(int y) { return data.data() + static_cast<size_t>(y) * width; }
    size_t size() const { return data.size(); }
    bool empty() const { return width <= 0 || height <= 0; }
};

/// Extraction parameters. Defaults follow the classical DoG/SIFT conventions;
/// dsp_scales are the relative support sizes pooled into each descriptor.
struct SiftConfig {
    float sigma0 = 1.6f;              // base blur of the pyramid, px
    int intervals_per_octave = 3;     // s
    float assumed_input_blur = 0.5f;  // blur already present in the input, px
    float contrast_threshold = 0.04f;
    float edge_ratio = 10.0f;
    int max_refine_iters = 5;
    int64_t upsample_pixel_limit = 4'000'000;  // above this, skip 2x upsampling
    std::vector<double> dsp_scales = {0.5, 1.0 / 1.4142135623730951, 1.0,
                                      1.4142135623730951, 2.0};
    float descriptor_clip = 0.2f;
    int orientation_bins = 36;
    float orientation_peak_ratio = 0.8f;
    int num_octaves = 0;  // 0 = auto

    /// Throws std::invalid_argument on any violated invariant.
    void validate() const;
};

/// Parses a flat "key = value" config file; unknown keys are an error.
SiftConfig load_config(const std::string& path);

/// Applies a single "key=value" override to cfg (same keys as the file format).
void apply_config_entry(SiftConfig& cfg, const std::string& key, const std::string& value);

struct Keypoint {
    float x = 0.0f;       // sub-pixel position, original-image px
    float y = 0.0f;
    float sigma = 0.0f;   // absolute scale, original-image px
    float angle = 0.0f;   // orientation, radians in [0, 2pi)
    float response = 0.0f;
    int32_t octave = 0;
    int32_t interval = 0;
};

/// Keypoints with row-aligned descriptors (row i belongs to keypoints[i]).
struct FeatureSet {
    std::vector<Keypoint> keypoints;
    std::vector<float> descriptors;  // row-major, size() = keypoints.size() * dim
    int dim = 128;

    size_t size() const { return keypoints.size(); }
    std::span<const float> row(size_t i) const {
        return {descriptors.data() + i * dim, static_cast<size_t>(dim)};
    }
    std::span<float> row(size_t i) {
        return {descriptors.data() + i * dim, static_cast<size_t>(dim)};
    }
};

/// Sorts keypoints (and descriptor rows in lockstep) by
/// (octave, interval, y, x, angle), with remaining fields and descriptor bytes
/// as final tie-breakers so the order is total and permutation-independent.
void canonical_sort(FeatureSet& features);

/// Canonical little-endian byte stream: magic "DSF1", version, count, dim,
/// per-keypoint records, then the descriptor matrix. Canonical order is
/// enforced before encoding.
std::vector<uint8_t> serialize_features(const FeatureSet& features);

void write_features(const FeatureSet& features, const std::string& path);
FeatureSet read_features(const std::string& path);

}  // namespace detsift
