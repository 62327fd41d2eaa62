#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "detsift/describe.hpp"
#include "detsift/orient.hpp"

namespace detsift::oracles {

namespace {

int reflect101(int p, int n) {
    if (n == 1) return 0;
    while (p < 0 || p >= n) {
        if (p < 0) p = -p;
        if (p >= n) p = 2 * n - 2 - p;
    }
    return p;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

GrayImage dense_gaussian_conv2d(const GrayImage& img, double sigma) {
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> weights(size_t(2 * radius + 1) * (2 * radius + 1));
    double sum = 0.0;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            weights[size_t(dy + radius) * (2 * radius + 1) + (dx + radius)] = w;
            sum += w;
        }
    for (double& w : weights) w /= sum;

    GrayImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx)
                    acc += weights[size_t(dy + radius) * (2 * radius + 1) + (dx + radius)] *
                           img.at(reflect101(x + dx, img.width), reflect101(y + dy, img.height));
            out.at(x, y) = static_cast<float>(acc);
        }
    return out;
}

namespace {

// Gaussian elimination with partial pivoting; |det| below eps reports failure.
bool solve3(double a[3][3], double b[3], double out[3]) {
    int piv[3] = {0, 1, 2};
    double det = 1.0;
    for (int col = 0; col < 3; ++col) {
        int best = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(a[piv[r]][col]) > std::fabs(a[piv[best]][col])) best = r;
        std::swap(piv[col], piv[best]);
        if (best != col) det = -det;
        const double p = a[piv[col]][col];
        det *= p;
        if (p == 0.0) return false;
        for (int r = col + 1; r < 3; ++r) {
            const double f = a[piv[r]][col] / p;
            for (int c = col; c < 3; ++c) a[piv[r]][c] -= f * a[piv[col]][c];
            b[piv[r]] -= f * b[piv[col]];
        }
    }
    if (std::fabs(det) < 1e-12) return false;
    for (int col = 2; col >= 0; --col) {
        double acc = b[piv[col]];
        for (int c = col + 1; c < 3; ++c) acc -= a[piv[col]][c] * out[c];
        out[col] = acc / a[piv[col]][col];
    }
    return true;
}

}  // namespace

std::vector<OracleKeypoint> brute_force_detect(const ScaleSpace& ss, const SiftConfig& cfg) {
    const int s = ss.intervals;
    const double pre_gate = 0.5 * cfg.contrast_threshold / s;
    std::vector<OracleKeypoint> out;

    for (size_t o = 0; o < ss.octaves.size(); ++o) {
        const auto& dog = ss.octaves[o].dog;
        const int w = dog[0].width, h = dog[0].height;
        for (int i = 1; i <= s; ++i) {
            for (int y = 1; y < h - 1; ++y) {
                for (int x = 1; x < w - 1; ++x) {
                    const double v = dog[i].at(x, y);
                    if (!(std::fabs(v) > pre_gate)) continue;
                    bool is_max = true, is_min = true;
                    for (int di = -1; di <= 1; ++di)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                if (di == 0 && dy == 0 && dx == 0) continue;
                                const double nb = dog[i + di].at(x + dx, y + dy);
                                if (nb >= v) is_max = false;
                                if (nb <= v) is_min = false;
                            }
                    if (!is_max && !is_min) continue;

                    // Iterative refinement, naive solver.
                    int cx = x, cy = y, ci = i;
                    double dx_ = 0, dy_ = 0, ds_ = 0;
                    double gx = 0, gy = 0, gs = 0, dxx = 0, dyy = 0, dxy = 0;
                    bool converged = false, rejected = false;
                    for (int iter = 0; iter < cfg.max_refine_iters; ++iter) {
                        const GrayImage& D0 = dog[ci - 1];
                        const GrayImage& D1 = dog[ci];
                        const GrayImage& D2 = dog[ci + 1];
                        const double vv = D1.at(cx, cy);
                        gx = 0.5 * (double(D1.at(cx + 1, cy)) - D1.at(cx - 1, cy));
                        gy = 0.5 * (double(D1.at(cx, cy + 1)) - D1.at(cx, cy - 1));
                        gs = 0.5 * (double(D2.at(cx, cy)) - D0.at(cx, cy));
                        dxx = double(D1.at(cx + 1, cy)) + D1.at(cx - 1, cy) - 2.0 * vv;
                        dyy = double(D1.at(cx, cy + 1)) + D1.at(cx, cy - 1) - 2.0 * vv;
                        const double dss = double(D2.at(cx, cy)) + D0.at(cx, cy) - 2.0 * vv;
                        dxy = 0.25 * (double(D1.at(cx + 1, cy + 1)) - D1.at(cx - 1, cy + 1) -
                                      D1.at(cx + 1, cy - 1) + D1.at(cx - 1, cy - 1));
                        const double dxs = 0.25 * (double(D2.at(cx + 1, cy)) - D2.at(cx - 1, cy) -
                                                   D0.at(cx + 1, cy) + D0.at(cx - 1, cy));
                        const double dys = 0.25 * (double(D2.at(cx, cy + 1)) - D2.at(cx, cy - 1) -
                                                   D0.at(cx, cy + 1) + D0.at(cx, cy - 1));
                        double A[3][3] = {{dxx, dxy, dxs}, {dxy, dyy, dys}, {dxs, dys, dss}};
                        double b[3] = {-gx, -gy, -gs};
                        double sol[3];
                        if (!solve3(A, b, sol)) {
                            rejected = true;
                            break;
                        }
                        dx_ = sol[0];
                        dy_ = sol[1];
                        ds_ = sol[2];
                        if (std::fabs(dx_) <= 0.5 && std::fabs(dy_) <= 0.5 &&
                            std::fabs(ds_) <= 0.5) {
                            converged = true;
                            break;
                        }
                        if (dx_ > 0.5) ++cx; else if (dx_ < -0.5) --cx;
                        if (dy_ > 0.5) ++cy; else if (dy_ < -0.5) --cy;
                        if (ds_ > 0.5) ++ci; else if (ds_ < -0.5) --ci;
                        if (cx < 1 || cx >= w - 1 || cy < 1 || cy >= h - 1 || ci < 1 || ci > s) {
                            rejected = true;
                            break;
                        }
                    }
                    if (rejected || !converged) continue;
                    const double value =
                        dog[ci].at(cx, cy) + 0.5 * (gx * dx_ + gy * dy_ + gs * ds_);
                    if (std::fabs(value) < double(cfg.contrast_threshold) / s) continue;
                    const double tr = dxx + dyy;
                    const double det2 = dxx * dyy - dxy * dxy;
                    const double r = cfg.edge_ratio;
                    if (det2 <= 0.0 || tr * tr * r >= det2 * (r + 1.0) * (r + 1.0)) continue;

                    const double to_input = ss.octave_to_input_scale(int(o));
                    out.push_back({(cx + dx_) * to_input, (cy + dy_) * to_input,
                                   ss.sigma0 * std::pow(2.0, double(o) + (ci + ds_) / s) *
                                       (ss.upsampled ? 0.5 : 1.0),
                                   int(o), ci, std::fabs(value)});
                }
            }
        }
    }
    return out;
}

std::vector<double> naive_orientation_histogram(const ScaleSpace& ss, const Keypoint& kp,
                                                const SiftConfig& cfg) {
    const double to_input = ss.octave_to_input_scale(kp.octave);
    const double cx = kp.x / to_input;
    const double cy = kp.y / to_input;
    const double sigma_rel = kp.sigma / to_input;
    const GrayImage& img = ss.octaves[kp.octave].gauss[nearest_gauss_level(ss, sigma_rel)];
    const int radius = static_cast<int>(std::lround(3.0 * 1.5 * sigma_rel));
    const int x0 = static_cast<int>(std::lround(cx));
    const int y0 = static_cast<int>(std::lround(cy));

    std::vector<double> hist(cfg.orientation_bins, 0.0);
    for (int y = y0 - radius; y <= y0 + radius; ++y) {
        if (y < 1 || y >= img.height - 1) continue;
        for (int x = x0 - radius; x <= x0 + radius; ++x) {
            if (x < 1 || x >= img.width - 1) continue;
            const float dx = img.at(x + 1, y) - img.at(x - 1, y);
            const float dy = img.at(x, y + 1) - img.at(x, y - 1);
            const float mag = std::sqrt(dx * dx + dy * dy);
            float theta = std::atan2(dy, dx);
            if (theta < 0.0f) theta += static_cast<float>(kTwoPi);
            int bin = static_cast<int>(theta * cfg.orientation_bins / kTwoPi);
            if (bin >= cfg.orientation_bins) bin -= cfg.orientation_bins;
            const double ddx = x - cx, ddy = y - cy;
            const double w =
                std::exp(-(ddx * ddx + ddy * ddy) / (2.0 * 1.5 * sigma_rel * 1.5 * sigma_rel));
            hist[bin] += double(mag) * w;
        }
    }
    return hist;
}

namespace {

double bilinear_d(const GrayImage& img, double x, double y) {
    int ix = std::min(int(std::floor(x)), img.width - 2);
    int iy = std::min(int(std::floor(y)), img.height - 2);
    const double fx = x - ix, fy = y - iy;
    const double v00 = img.at(ix, iy), v10 = img.at(ix + 1, iy);
    const double v01 = img.at(ix, iy + 1), v11 = img.at(ix + 1, iy + 1);
    const double top = v00 + fx * (v10 - v00);
    const double bot = v01 + fx * (v11 - v01);
    return top + fy * (bot - top);
}

}  // namespace

std::vector<double> naive_single_scale_descriptor(const ScaleSpace& ss, const Keypoint& kp,
                                                  const SiftConfig& cfg) {
    const double to_input = ss.octave_to_input_scale(kp.octave);
    const double cx = kp.x / to_input;
    const double cy = kp.y / to_input;
    const double sigma_rel = kp.sigma / to_input;
    const GrayImage& img = ss.octaves[kp.octave].gauss[nearest_gauss_level(ss, sigma_rel)];

    const int d = kDescriptorCells;
    const int nbins = kDescriptorOrients;
    const double bin_width = 3.0 * sigma_rel;
    const int radius = static_cast<int>(std::lround(bin_width * (d + 1) * 0.5 * std::sqrt(2.0)));
    const double cosa = std::cos(double(kp.angle));
    const double sina = std::sin(double(kp.angle));

    auto sample = [&](int u, int v, double& out) {
        const double px = cx + cosa * u - sina * v;
        const double py = cy + sina * u + cosa * v;
        if (px < 0.0 || px > img.width - 1 || py < 0.0 || py > img.height - 1) return false;
        out = bilinear_d(img, px, py);
        return true;
    };

    std::vector<double> hist(kDescriptorDim, 0.0);
    for (int v = -radius; v <= radius; ++v) {
        for (int u = -radius; u <= radius; ++u) {
            double left, right, up, down;
            if (!sample(u - 1, v, left) || !sample(u + 1, v, right) ||
                !sample(u, v - 1, up) || !sample(u, v + 1, down))
                continue;
            const double ubin = u / bin_width + (d / 2 - 0.5);
            const double vbin = v / bin_width + (d / 2 - 0.5);
            if (ubin <= -1.0 || ubin >= d || vbin <= -1.0 || vbin >= d) continue;
            const double du = 0.5 * (right - left);
            const double dv = 0.5 * (down - up);
            const double mag = std::sqrt(du * du + dv * dv);
            double theta = std::atan2(dv, du);
            if (theta < 0.0) theta += kTwoPi;
            double obin = theta * nbins / kTwoPi;
            if (obin >= nbins) obin -= nbins;
            const double uu = u / bin_width, vv = v / bin_width;
            const double w = std::exp(-(uu * uu + vv * vv) / (2.0 * 0.5 * d * 0.5 * d));
            const double value = mag * w;
            const int r0 = static_cast<int>(std::floor(vbin));
            const int c0 = static_cast<int>(std::floor(ubin));
            const int o0 = static_cast<int>(std::floor(obin));
            const double fr = vbin - r0, fc = ubin - c0, fo = obin - o0;
            for (int ri = 0; ri < 2; ++ri) {
                const int row = r0 + ri;
                if (row < 0 || row >= d) continue;
                for (int ci = 0; ci < 2; ++ci) {
                    const int col = c0 + ci;
                    if (col < 0 || col >= d) continue;
                    for (int oi = 0; oi < 2; ++oi) {
                        const int ob = (o0 + oi) % nbins;
                        hist[(size_t(row) * d + col) * nbins + ob] +=
                            value * (ri ? fr : 1.0 - fr) * (ci ? fc : 1.0 - fc) *
                            (oi ? fo : 1.0 - fo);
                    }
                }
            }
        }
    }

    auto l2 = [&hist] {
        double acc = 0.0;
        for (double v : hist) acc += v * v;
        return std::sqrt(acc);
    };
    double norm = l2();
    if (norm == 0.0) return hist;
    for (double& v : hist) v /= norm;
    for (double& v : hist) v = std::min(v, double(cfg.descriptor_clip));
    norm = l2();
    for (double& v : hist) v /= norm;
    double l1 = 0.0;
    for (double v : hist) l1 += v;
    for (double& v : hist) v = std::sqrt(v / l1);
    return hist;
}

MatchSet naive_ratio_match(const FeatureSet& a, const FeatureSet& b, float ratio) {
    MatchSet out;
    if (a.size() < 2 || b.size() < 2) return out;

    struct Entry {
        float d;
        int idx;
    };
    auto nearest_two = [](const std::vector<Entry>& row) {
        std::vector<Entry> sorted = row;
        std::sort(sorted.begin(), sorted.end(), [](const Entry& p, const Entry& q) {
            if (p.d != q.d) return p.d < q.d;
            return p.idx < q.idx;
        });
        return std::pair<Entry, Entry>(sorted[0], sorted[1]);
    };

    std::vector<int> best_a(a.size(), -1), best_b(b.size(), -1);
    std::vector<float> dist_a(a.size(), 0.0f);
    for (size_t i = 0; i < a.size(); ++i) {
        std::vector<Entry> row(b.size());
        for (size_t j = 0; j < b.size(); ++j)
            row[j] = {descriptor_distance(a.row(i), b.row(j)), int(j)};
        const auto [first, second] = nearest_two(row);
        if (first.d < ratio * second.d) {
            best_a[i] = first.idx;
            dist_a[i] = first.d;
        }
    }
    for (size_t j = 0; j < b.size(); ++j) {
        std::vector<Entry> row(a.size());
        for (size_t i = 0; i < a.size(); ++i)
            row[i] = {descriptor_distance(b.row(j), a.row(i)), int(i)};
        const auto [first, second] = nearest_two(row);
        if (first.d < ratio * second.d) best_b[j] = first.idx;
    }
    for (size_t i = 0; i < a.size(); ++i)
        if (best_a[i] >= 0) ++out.putative_a;
    for (size_t j = 0; j < b.size(); ++j)
        if (best_b[j] >= 0) ++out.putative_b;
    for (size_t i = 0; i < a.size(); ++i) {
        const int j = best_a[i];
        if (j >= 0 && best_b[j] == int(i)) out.pairs.push_back({int(i), j, dist_a[i]});
    }
    return out;
}

}  // namespace detsift::oracles
