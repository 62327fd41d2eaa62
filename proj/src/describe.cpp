#include "detsift/describe.hpp"

#include <cmath>
#include <stdexcept>

#include "detsift/detsum.hpp"
#include "detsift/orient.hpp"

namespace detsift {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr float kUndefined = -1.0f;  // lattice samples without full bilinear support

// Bilinear sample; valid for p in [0, n-1] on each axis.
inline float sample_bilinear(const GrayImage& img, double x, double y) {
    int ix = static_cast<int>(std::floor(x));
    int iy = static_cast<int>(std::floor(y));
    ix = std::min(ix, img.width - 2);
    iy = std::min(iy, img.height - 2);
    const float fx = static_cast<float>(x - ix);
    const float fy = static_cast<float>(y - iy);
    const float v00 = img.at(ix, iy), v10 = img.at(ix + 1, iy);
    const float v01 = img.at(ix, iy + 1), v11 = img.at(ix + 1, iy + 1);
    const float top = v00 + fx * (v10 - v00);
    const float bot = v01 + fx * (v11 - v01);
    return top + fy * (bot - top);
}

}  // namespace

std::vector<float> raw_descriptor(const ScaleSpace& ss, const Keypoint& kp,
                                  double scale_factor, const SiftConfig&,
                                  int workers) {
    if (!(scale_factor > 0.0))
        throw std::invalid_argument("raw_descriptor: scale_factor must be > 0");

    const double to_input = ss.octave_to_input_scale(kp.octave);
    const double cx = kp.x / to_input;
    const double cy = kp.y / to_input;
    const double sigma_rel = kp.sigma / to_input;

    const GrayImage& img =
        ss.octaves[kp.octave].gauss[nearest_gauss_level(ss, scale_factor * sigma_rel)];

    const int d = kDescriptorCells;
    const int nbins = kDescriptorOrients;
    const double bin_width = 3.0 * scale_factor * sigma_rel;
    const int radius = static_cast<int>(
        std::lround(bin_width * (d + 1) * 0.5 * std::sqrt(2.0)));

    const double cosa = std::cos(double(kp.angle));
    const double sina = std::sin(double(kp.angle));

    // Lattice of bilinear samples in the rotated frame, one guard ring for
    // the central differences. kUndefined marks missing support.
    const int side = 2 * radius + 3;
    std::vector<float> patch(size_t(side) * side, kUndefined);
    for (int v = -radius - 1; v <= radius + 1; ++v) {
        for (int u = -radius - 1; u <= radius + 1; ++u) {
            const double px = cx + cosa * u - sina * v;
            const double py = cy + sina * u + cosa * v;
            if (px < 0.0 || px > img.width - 1 || py < 0.0 || py > img.height - 1)
                continue;
            patch[size_t(v + radius + 1) * side + (u + radius + 1)] =
                sample_bilinear(img, px, py);
        }
    }
    auto patch_at = [&](int u, int v) -> float {
        return patch[size_t(v + radius + 1) * side + (u + radius + 1)];
    };

    std::vector<detsum::Contribution> contribs;
    contribs.reserve(size_t(2 * radius + 1) * (2 * radius + 1) * 2);
    for (int v = -radius; v <= radius; ++v) {
        for (int u = -radius; u <= radius; ++u) {
            const float left = patch_at(u - 1, v), right = patch_at(u + 1, v);
            const float up = patch_at(u, v - 1), down = patch_at(u, v + 1);
            if (left == kUndefined || right == kUndefined || up == kUndefined ||
                down == kUndefined)
                continue;

            const double ubin = u / bin_width + (d / 2 - 0.5);
            const double vbin = v / bin_width + (d / 2 - 0.5);
            if (ubin <= -1.0 || ubin >= d || vbin <= -1.0 || vbin >= d) continue;

            const float du = 0.5f * (right - left);
            const float dv = 0.5f * (down - up);
            const float mag = std::sqrt(du * du + dv * dv);
            float theta = std::atan2(dv, du);  // already relative to kp.angle
            if (theta < 0.0f) theta += static_cast<float>(kTwoPi);
            double obin = theta * nbins / kTwoPi;
            if (obin >= nbins) obin -= nbins;

            const double uu = u / bin_width, vv = v / bin_width;
            const float w = static_cast<float>(
                std::exp(-(uu * uu + vv * vv) / (2.0 * (0.5 * d) * (0.5 * d))));
            const float value = mag * w;

            const int r0 = static_cast<int>(std::floor(vbin));
            const int c0 = static_cast<int>(std::floor(ubin));
            const int o0 = static_cast<int>(std::floor(obin));
            const float fr = static_cast<float>(vbin - r0);
            const float fc = static_cast<float>(ubin - c0);
            const float fo = static_cast<float>(obin - o0);

            for (int ri = 0; ri < 2; ++ri) {
                const int row = r0 + ri;
                if (row < 0 || row >= d) continue;
                const float wr = ri ? fr : 1.0f - fr;
                for (int ci = 0; ci < 2; ++ci) {
                    const int col = c0 + ci;
                    if (col < 0 || col >= d) continue;
                    const float wc = ci ? fc : 1.0f - fc;
                    for (int oi = 0; oi < 2; ++oi) {
                        const int ob = (o0 + oi) % nbins;
                        const float wo = oi ? fo : 1.0f - fo;
                        const int bin = (row * d + col) * nbins + ob;
                        contribs.push_back({bin, value * wr * wc * wo});
                    }
                }
            }
        }
    }
    return detsum::tree_accumulate_histogram(contribs, kDescriptorDim, workers);
}

void root_sift(std::span<float> v) {
    std::vector<float> vals(v.begin(), v.end());
    for (float x : vals)
        if (x < 0.0f) throw std::invalid_argument("root_sift: negative component");
    const float l1 = detsum::tree_sum(std::span<const float>(vals));
    if (l1 == 0.0f) return;
    for (size_t i = 0; i < v.size(); ++i) v[i] = std::sqrt(vals[i] / l1);
}

namespace {

float l2_norm(std::span<const float> v) {
    std::vector<float> sq(v.size());
    for (size_t i = 0; i < v.size(); ++i) sq[i] = v[i] * v[i];
    return std::sqrt(detsum::tree_sum(std::span<const float>(sq)));
}

}  // namespace

std::vector<float> dsp_descriptor(const ScaleSpace& ss, const Keypoint& kp,
                                  const SiftConfig& cfg, int workers) {
    const size_t nscales = cfg.dsp_scales.size();
    std::vector<std::vector<float>> raws;
    raws.reserve(nscales);
    for (double f : cfg.dsp_scales)
        raws.push_back(raw_descriptor(ss, kp, f, cfg, workers));

    std::vector<float> desc(kDescriptorDim, 0.0f);
    std::vector<float> stack(nscales);
    for (int b = 0; b < kDescriptorDim; ++b) {
        for (size_t si = 0; si < nscales; ++si) stack[si] = raws[si][b];
        desc[b] = detsum::tree_sum(std::span<const float>(stack)) /
                  static_cast<float>(nscales);
    }

    float norm = l2_norm(desc);
    if (norm == 0.0f) return desc;
    for (float& x : desc) x /= norm;
    for (float& x : desc) x = std::min(x, cfg.descriptor_clip);
    norm = l2_norm(desc);
    if (norm > 0.0f)
        for (float& x : desc) x /= norm;
    root_sift(desc);
    return desc;
}

}  // namespace detsift
