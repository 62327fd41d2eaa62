#include "detsift/detect.hpp"

#include <cmath>

#include "detsift/parallel.hpp"

namespace detsift {

namespace {

inline bool strictly_extremal(const GrayImage& below, const GrayImage& mid,
                              const GrayImage& above, int x, int y, float v, bool is_max) {
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            const float nb = below.at(x + dx, y + dy);
            const float na = above.at(x + dx, y + dy);
            if (is_max) {
                if (nb >= v || na >= v) return false;
            } else {
                if (nb <= v || na <= v) return false;
            }
            if (dx == 0 && dy == 0) continue;
            const float nm = mid.at(x + dx, y + dy);
            if (is_max ? nm >= v : nm <= v) return false;
        }
    }
    return true;
}

}  // namespace

std::vector<RawExtremum> find_extrema(const ScaleSpace& ss, const SiftConfig& cfg,
                                      int workers) {
    const int s = ss.intervals;
    const float pre_gate = 0.5f * cfg.contrast_threshold / s;
    std::vector<RawExtremum> out;

    for (size_t o = 0; o < ss.octaves.size(); ++o) {
        const auto& dog = ss.octaves[o].dog;
        for (int i = 1; i <= s; ++i) {
            const GrayImage& below = dog[i - 1];
            const GrayImage& mid = dog[i];
            const GrayImage& above = dog[i + 1];
            const int w = mid.width, h = mid.height;
            if (w < 3 || h < 3) continue;

            // Contiguous row bands; concatenating band results in band order
            // reproduces the sequential row-major scan for any worker count.
            const int rows = h - 2;
            const int nworkers = std::min(resolve_workers(workers), std::max(rows, 1));
            std::vector<std::vector<RawExtremum>> bands(nworkers);
            parallel_for(rows, nworkers, [&](int64_t r0, int64_t r1) {
                const int band =
                    static_cast<int>(r0 / ((rows + nworkers - 1) / nworkers));
                auto& local = bands[band];
                for (int y = static_cast<int>(r0) + 1; y < r1 + 1; ++y) {
                    const float* row = mid.row(y);
                    for (int x = 1; x < w - 1; ++x) {
                        const float v = row[x];
                        if (!(std::fabs(v) > pre_gate)) continue;
                        const bool is_max = v > 0.0f;
                        if (strictly_extremal(below, mid, above, x, y, v, is_max))
                            local.push_back({static_cast<int>(o), i, y, x, is_max});
                    }
                }
            });
            for (auto& band : bands) out.insert(out.end(), band.begin(), band.end());
        }
    }
    return out;
}

std::optional<Keypoint> refine_extremum(const ScaleSpace& ss, const RawExtremum& e,
                                        const SiftConfig& cfg) {
    const int s = ss.intervals;
    const auto& dog = ss.octaves[e.octave].dog;
    const int w = dog[0].width, h = dog[0].height;

    int x = e.col, y = e.row, i = e.interval;
    double dx = 0, dy = 0, ds = 0;           // refinement offset
    double gx = 0, gy = 0, gs = 0;           // gradient at the final voxel
    double dxx = 0, dyy = 0, dxy = 0;        // spatial Hessian entries
    bool converged = false;

    for (int iter = 0; iter < cfg.max_refine_iters; ++iter) {
        const GrayImage& D0 = dog[i - 1];
        const GrayImage& D1 = dog[i];
        const GrayImage& D2 = dog[i + 1];
        const double v = D1.at(x, y);

        gx = 0.5 * (double(D1.at(x + 1, y)) - D1.at(x - 1, y));
        gy = 0.5 * (double(D1.at(x, y + 1)) - D1.at(x, y - 1));
        gs = 0.5 * (double(D2.at(x, y)) - D0.at(x, y));

        dxx = double(D1.at(x + 1, y)) + D1.at(x - 1, y) - 2.0 * v;
        dyy = double(D1.at(x, y + 1)) + D1.at(x, y - 1) - 2.0 * v;
        const double dss = double(D2.at(x, y)) + D0.at(x, y) - 2.0 * v;
        dxy = 0.25 * (double(D1.at(x + 1, y + 1)) - D1.at(x - 1, y + 1) -
                      D1.at(x + 1, y - 1) + D1.at(x - 1, y - 1));
        const double dxs = 0.25 * (double(D2.at(x + 1, y)) - D2.at(x - 1, y) -
                                   D0.at(x + 1, y) + D0.at(x - 1, y));
        const double dys = 0.25 * (double(D2.at(x, y + 1)) - D2.at(x, y - 1) -
                                   D0.at(x, y + 1) + D0.at(x, y - 1));

        // Cramer's rule on H * delta = -g.
        const double det = dxx * (dyy * dss - dys * dys) -
                           dxy * (dxy * dss - dys * dxs) +
                           dxs * (dxy * dys - dyy * dxs);
        if (std::fabs(det) < 1e-12) return std::nullopt;

        const double det_x = -gx * (dyy * dss - dys * dys) -
                             dxy * (-gy * dss - dys * -gs) +
                             dxs * (-gy * dys - dyy * -gs);
        const double det_y = dxx * (-gy * dss - dys * -gs) -
                             (-gx) * (dxy * dss - dys * dxs) +
                             dxs * (dxy * -gs - (-gy) * dxs);
        const double det_s = dxx * (dyy * -gs - (-gy) * dys) -
                             dxy * (dxy * -gs - (-gy) * dxs) +
                             (-gx) * (dxy * dys - dyy * dxs);
        dx = det_x / det;
        dy = det_y / det;
        ds = det_s / det;

        if (std::fabs(dx) <= 0.5 && std::fabs(dy) <= 0.5 && std::fabs(ds) <= 0.5) {
            converged = true;
            break;
        }
        if (dx > 0.5) ++x; else if (dx < -0.5) --x;
        if (dy > 0.5) ++y; else if (dy < -0.5) --y;
        if (ds > 0.5) ++i; else if (ds < -0.5) --i;
        if (x < 1 || x >= w - 1 || y < 1 || y >= h - 1 || i < 1 || i > s)
            return std::nullopt;
    }
    if (!converged) return std::nullopt;

    const double value = dog[i].at(x, y) + 0.5 * (gx * dx + gy * dy + gs * ds);
    if (std::fabs(value) < double(cfg.contrast_threshold) / s) return std::nullopt;

    const double tr = dxx + dyy;
    const double det2 = dxx * dyy - dxy * dxy;
    const double r = cfg.edge_ratio;
    if (det2 <= 0.0 || tr * tr * r >= det2 * (r + 1.0) * (r + 1.0)) return std::nullopt;

    const double to_input = ss.octave_to_input_scale(e.octave);
    Keypoint kp;
    kp.x = static_cast<float>((x + dx) * to_input);
    kp.y = static_cast<float>((y + dy) * to_input);
    kp.sigma = static_cast<float>(ss.sigma0 *
                                  std::pow(2.0, e.octave + (i + ds) / s) *
                                  (ss.upsampled ? 0.5 : 1.0));
    kp.angle = 0.0f;
    kp.response = static_cast<float>(std::fabs(value));
    kp.octave = e.octave;
    kp.interval = i;
    return kp;
}

std::vector<Keypoint> detect_keypoints(const ScaleSpace& ss, const SiftConfig& cfg,
                                       int workers) {
    const std::vector<RawExtremum> candidates = find_extrema(ss, cfg, workers);
    std::vector<std::optional<Keypoint>> slots(candidates.size());
    parallel_for(static_cast<int64_t>(candidates.size()), workers,
                 [&](int64_t lo, int64_t hi) {
                     for (int64_t c = lo; c < hi; ++c)
                         slots[c] = refine_extremum(ss, candidates[c], cfg);
                 });
    std::vector<Keypoint> out;
    out.reserve(candidates.size());
    for (const auto& slot : slots)
        if (slot) out.push_back(*slot);
    return out;
}

}  // namespace detsift
