#include "detsift/orient.hpp"

#include <cmath>

#include "detsift/detsum.hpp"

namespace detsift {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

int nearest_gauss_level(const ScaleSpace& ss, double sigma_rel) {
    int best = 0;
    double best_diff = std::fabs(ss.level_sigma(0) - sigma_rel);
    for (int i = 1; i < ss.intervals + 3; ++i) {
        const double diff = std::fabs(ss.level_sigma(i) - sigma_rel);
        if (diff < best_diff) {
            best_diff = diff;
            best = i;
        }
    }
    return best;
}

std::vector<float> orientation_histogram(const ScaleSpace& ss, const Keypoint& kp,
                                         const SiftConfig& cfg, int workers) {
    const double to_input = ss.octave_to_input_scale(kp.octave);
    const double cx = kp.x / to_input;
    const double cy = kp.y / to_input;
    const double sigma_rel = kp.sigma / to_input;

    const GrayImage& img = ss.octaves[kp.octave].gauss[nearest_gauss_level(ss, sigma_rel)];
    const int radius = static_cast<int>(std::lround(3.0 * 1.5 * sigma_rel));
    const double weight_denom = 2.0 * (1.5 * sigma_rel) * (1.5 * sigma_rel);
    const int bins = cfg.orientation_bins;

    const int x0 = static_cast<int>(std::lround(cx));
    const int y0 = static_cast<int>(std::lround(cy));

    std::vector<detsum::Contribution> contribs;
    contribs.reserve(size_t(2 * radius + 1) * (2 * radius + 1));
    for (int y = y0 - radius; y <= y0 + radius; ++y) {
        if (y < 1 || y >= img.height - 1) continue;
        for (int x = x0 - radius; x <= x0 + radius; ++x) {
            if (x < 1 || x >= img.width - 1) continue;
            const float dx = img.at(x + 1, y) - img.at(x - 1, y);
            const float dy = img.at(x, y + 1) - img.at(x, y - 1);
            const float mag = std::sqrt(dx * dx + dy * dy);
            float theta = std::atan2(dy, dx);
            if (theta < 0.0f) theta += static_cast<float>(kTwoPi);
            int bin = static_cast<int>(theta * bins / kTwoPi);
            if (bin >= bins) bin -= bins;
            const double ddx = x - cx, ddy = y - cy;
            const float w = static_cast<float>(std::exp(-(ddx * ddx + ddy * ddy) / weight_denom));
            contribs.push_back({bin, mag * w});
        }
    }
    return detsum::tree_accumulate_histogram(contribs, bins, workers);
}

std::vector<float> smooth_histogram_circular(const std::vector<float>& hist, int passes) {
    const int n = static_cast<int>(hist.size());
    std::vector<float> cur = hist, next(n);
    for (int p = 0; p < passes; ++p) {
        for (int i = 0; i < n; ++i) {
            const double prev = cur[(i + n - 1) % n];
            const double mid = cur[i];
            const double succ = cur[(i + 1) % n];
            next[i] = static_cast<float>(0.25 * prev + 0.5 * mid + 0.25 * succ);
        }
        std::swap(cur, next);
    }
    return cur;
}

std::vector<Keypoint> assign_orientations(const ScaleSpace& ss, const Keypoint& kp,
                                          const SiftConfig& cfg, int workers) {
    const int bins = cfg.orientation_bins;
    const std::vector<float> hist =
        smooth_histogram_circular(orientation_histogram(ss, kp, cfg, workers), 2);

    float max_val = 0.0f;
    for (float v : hist) max_val = std::max(max_val, v);

    std::vector<Keypoint> out;
    if (max_val > 0.0f) {
        const float gate = cfg.orientation_peak_ratio * max_val;
        for (int b = 0; b < bins; ++b) {
            const float h0 = hist[b];
            const float hm = hist[(b + bins - 1) % bins];
            const float hp = hist[(b + 1) % bins];
            if (!(h0 > hm && h0 > hp && h0 >= gate)) continue;
            const double denom = double(hm) - 2.0 * h0 + hp;
            const double delta = denom != 0.0 ? 0.5 * (double(hm) - hp) / denom : 0.0;
            double angle = (b + delta) * kTwoPi / bins;
            if (angle < 0.0) angle += kTwoPi;
            if (angle >= kTwoPi) angle -= kTwoPi;
            Keypoint copy = kp;
            copy.angle = static_cast<float>(angle);
            if (copy.angle == 0.0f) copy.angle = 0.0f;  // canonicalize -0.0
            if (copy.angle >= static_cast<float>(kTwoPi)) copy.angle = 0.0f;
            out.push_back(copy);
        }
    }
    if (out.empty()) {
        // Flat or peakless window: keep one copy at angle 0.
        Keypoint copy = kp;
        copy.angle = 0.0f;
        out.push_back(copy);
    }
    return out;
}

}  // namespace detsift
