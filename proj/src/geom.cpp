#include "detsift/geom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "detsift/detsum.hpp"
#include "detsift/linalg.hpp"
#include "detsift/parallel.hpp"

namespace detsift {

void Homography::apply(double x, double y, double& ox, double& oy) const {
    const double w = h[6] * x + h[7] * y + h[8];
    if (std::fabs(w) < 1e-12) throw std::runtime_error("homography: point maps to infinity");
    ox = (h[0] * x + h[1] * y + h[2]) / w;
    oy = (h[3] * x + h[4] * y + h[5]) / w;
}

double Homography::det() const {
    return h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6]) +
           h[2] * (h[3] * h[7] - h[4] * h[6]);
}

Homography Homography::inverse() const {
    const double d = det();
    if (std::fabs(d) < 1e-15) throw std::runtime_error("homography: singular matrix");
    Homography inv;
    inv.h = {(h[4] * h[8] - h[5] * h[7]) / d, (h[2] * h[7] - h[1] * h[8]) / d,
             (h[1] * h[5] - h[2] * h[4]) / d, (h[5] * h[6] - h[3] * h[8]) / d,
             (h[0] * h[8] - h[2] * h[6]) / d, (h[2] * h[3] - h[0] * h[5]) / d,
             (h[3] * h[7] - h[4] * h[6]) / d, (h[1] * h[6] - h[0] * h[7]) / d,
             (h[0] * h[4] - h[1] * h[3]) / d};
    inv.normalize();
    return inv;
}

void Homography::normalize() {
    if (std::fabs(h[8]) > 1e-12) {
        const double inv = 1.0 / h[8];
        for (double& v : h) v *= inv;
        return;
    }
    double norm = 0.0;
    for (double v : h) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& v : h) v /= norm;
}

namespace {

struct NormTransform {
    double scale = 1.0, cx = 0.0, cy = 0.0;
};

// Translate centroid to the origin, scale mean distance to sqrt(2).
NormTransform hartley_normalize(std::span<const Correspondence> pairs, bool source,
                                std::vector<double>& xs, std::vector<double>& ys) {
    const size_t n = pairs.size();
    xs.resize(n);
    ys.resize(n);
    for (size_t i = 0; i < n; ++i) {
        xs[i] = source ? pairs[i].x1 : pairs[i].x2;
        ys[i] = source ? pairs[i].y1 : pairs[i].y2;
    }
    NormTransform t;
    double sx = 0.0, sy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    t.cx = sx / n;
    t.cy = sy / n;
    double mean_dist = 0.0;
    for (size_t i = 0; i < n; ++i)
        mean_dist += std::hypot(xs[i] - t.cx, ys[i] - t.cy);
    mean_dist /= n;
    if (mean_dist < 1e-12) throw std::runtime_error("dlt: degenerate (coincident points)");
    t.scale = std::sqrt(2.0) / mean_dist;
    for (size_t i = 0; i < n; ++i) {
        xs[i] = (xs[i] - t.cx) * t.scale;
        ys[i] = (ys[i] - t.cy) * t.scale;
    }
    return t;
}

bool three_collinear(const double* xs, const double* ys, size_t n) {
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
            for (size_t k = j + 1; k < n; ++k) {
                const double area = (xs[j] - xs[i]) * (ys[k] - ys[i]) -
                                    (xs[k] - xs[i]) * (ys[j] - ys[i]);
                if (std::fabs(area) < 1e-9) return true;  // normalized coords
            }
    return false;
}

}  // namespace

Homography dlt_homography(std::span<const Correspondence> pairs,
                          std::span<const double> weights) {
    const size_t n = pairs.size();
    if (n < 4) throw std::invalid_argument("dlt: need at least 4 correspondences");
    if (!weights.empty() && weights.size() != n)
        throw std::invalid_argument("dlt: weight count mismatch");

    std::vector<double> sx, sy, dx, dy;
    const NormTransform ts = hartley_normalize(pairs, true, sx, sy);
    const NormTransform td = hartley_normalize(pairs, false, dx, dy);

    if (n == 4 && (three_collinear(sx.data(), sy.data(), 4) ||
                   three_collinear(dx.data(), dy.data(), 4)))
        throw std::runtime_error("dlt: degenerate (collinear sample)");

    // Accumulate AtA directly; each correspondence contributes two rows.
    std::vector<double> ata(81, 0.0);
    auto add_row = [&](const std::array<double, 9>& row) {
        for (int p = 0; p < 9; ++p)
            for (int q = p; q < 9; ++q) ata[size_t(p) * 9 + q] += row[p] * row[q];
    };
    for (size_t i = 0; i < n; ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        const double x = sx[i], y = sy[i], u = dx[i], v = dy[i];
        add_row({0, 0, 0, -w * x, -w * y, -w, w * v * x, w * v * y, w * v});
        add_row({w * x, w * y, w, 0, 0, 0, -w * u * x, -w * u * y, -w * u});
    }
    for (int p = 0; p < 9; ++p)
        for (int q = 0; q < p; ++q) ata[size_t(p) * 9 + q] = ata[size_t(q) * 9 + p];

    const SymEigen eig = jacobi_eigen_sym(ata, 9);
    // Solution = eigenvector of the smallest eigenvalue (last in descending order).
    const double* hn = eig.vectors.data() + 8 * 9;

    Homography hnorm;
    std::copy(hn, hn + 9, hnorm.h.begin());

    // Denormalize: H = Td^-1 * Hn * Ts.
    Homography t_src, t_dst_inv;
    t_src.h = {ts.scale, 0, -ts.scale * ts.cx, 0, ts.scale, -ts.scale * ts.cy, 0, 0, 1};
    t_dst_inv.h = {1.0 / td.scale, 0, td.cx, 0, 1.0 / td.scale, td.cy, 0, 0, 1};

    auto matmul = [](const Homography& a, const Homography& b) {
        Homography c;
        for (int r = 0; r < 3; ++r)
            for (int col = 0; col < 3; ++col) {
                double acc = 0.0;
                for (int k = 0; k < 3; ++k) acc += a(r, k) * b(k, col);
                c(r, col) = acc;
            }
        return c;
    };
    Homography h = matmul(matmul(t_dst_inv, hnorm), t_src);
    h.normalize();
    for (double v : h.h)
        if (!std::isfinite(v)) throw std::runtime_error("dlt: non-finite solution");
    return h;
}

namespace {

// Squared symmetric transfer error; infinity when either projection blows up.
double symmetric_error_sq(const Homography& h, const Homography& hinv,
                          const Correspondence& c) {
    const double wf = h.h[6] * c.x1 + h.h[7] * c.y1 + h.h[8];
    const double wb = hinv.h[6] * c.x2 + hinv.h[7] * c.y2 + hinv.h[8];
    if (std::fabs(wf) < 1e-12 || std::fabs(wb) < 1e-12)
        return std::numeric_limits<double>::infinity();
    const double fx = (h.h[0] * c.x1 + h.h[1] * c.y1 + h.h[2]) / wf - c.x2;
    const double fy = (h.h[3] * c.x1 + h.h[4] * c.y1 + h.h[5]) / wf - c.y2;
    const double bx = (hinv.h[0] * c.x2 + hinv.h[1] * c.y2 + hinv.h[2]) / wb - c.x1;
    const double by = (hinv.h[3] * c.x2 + hinv.h[4] * c.y2 + hinv.h[5]) / wb - c.y1;
    return fx * fx + fy * fy + bx * bx + by * by;
}

}  // namespace

MagsacResult magsac_lite(std::span<const Correspondence> matches, int iterations,
                         double tau, uint64_t seed, int workers) {
    const size_t n = matches.size();
    if (n < 4) throw std::invalid_argument("magsac_lite: need at least 4 correspondences");
    if (!(tau > 0.0)) throw std::invalid_argument("magsac_lite: tau must be > 0");
    if (iterations < 1) throw std::invalid_argument("magsac_lite: iterations must be >= 1");

    // Hypothesis samples come from one sequential seeded stream so the set of
    // hypotheses is independent of scheduling; scoring is parallel.
    SplitMix64 rng(seed);
    std::vector<std::array<int, 4>> samples;
    samples.reserve(iterations);
    for (int it = 0; it < iterations; ++it) {
        std::array<int, 4> sample = {-1, -1, -1, -1};
        bool ok = false;
        for (int attempt = 0; attempt < 64 && !ok; ++attempt) {
            int filled = 0;
            int guard = 0;
            while (filled < 4 && guard < 256) {
                ++guard;
                const int idx = static_cast<int>(rng.next() % n);
                bool dup = false;
                for (int k = 0; k < filled; ++k) dup |= (sample[k] == idx);
                if (!dup) sample[filled++] = idx;
            }
            if (filled < 4) break;
            double xs[4], ys[4], xd[4], yd[4];
            for (int k = 0; k < 4; ++k) {
                xs[k] = matches[sample[k]].x1;
                ys[k] = matches[sample[k]].y1;
                xd[k] = matches[sample[k]].x2;
                yd[k] = matches[sample[k]].y2;
            }
            // Degeneracy pre-check in pixel coordinates; threshold scaled by
            // the sample's own extent.
            double span = 1e-12;
            for (int p = 0; p < 4; ++p)
                for (int q = p + 1; q < 4; ++q)
                    span = std::max({span, std::fabs(xs[p] - xs[q]), std::fabs(ys[p] - ys[q])});
            bool degenerate = false;
            for (int p = 0; p < 4 && !degenerate; ++p)
                for (int q = p + 1; q < 4 && !degenerate; ++q)
                    for (int r = q + 1; r < 4 && !degenerate; ++r) {
                        const double area =
                            (xs[q] - xs[p]) * (ys[r] - ys[p]) - (xs[r] - xs[p]) * (ys[q] - ys[p]);
                        const double area_d =
                            (xd[q] - xd[p]) * (yd[r] - yd[p]) - (xd[r] - xd[p]) * (yd[q] - yd[p]);
                        if (std::fabs(area) < 1e-8 * span * span ||
                            std::fabs(area_d) < 1e-8 * span * span)
                            degenerate = true;
                    }
            ok = !degenerate;
        }
        samples.push_back(ok ? sample : std::array<int, 4>{-1, -1, -1, -1});
    }

    const double tau_sq = tau * tau;
    std::vector<double> scores(iterations, -1.0);
    std::vector<Homography> models(iterations);
    std::vector<uint8_t> valid(iterations, 0);
    parallel_for(iterations, workers, [&](int64_t lo, int64_t hi) {
        std::vector<double> terms(n);
        for (int64_t it = lo; it < hi; ++it) {
            if (samples[it][0] < 0) continue;
            Correspondence minimal[4];
            for (int k = 0; k < 4; ++k) minimal[k] = matches[samples[it][k]];
            Homography h;
            try {
                h = dlt_homography(std::span<const Correspondence>(minimal, 4));
            } catch (const std::exception&) {
                continue;
            }
            if (!std::isfinite(h.det()) || h.det() == 0.0) continue;
            Homography hinv;
            try {
                hinv = h.inverse();
            } catch (const std::exception&) {
                continue;
            }
            for (size_t i = 0; i < n; ++i) {
                const double r2 = symmetric_error_sq(h, hinv, matches[i]);
                terms[i] = std::max(0.0, 1.0 - r2 / tau_sq);
            }
            scores[it] = detsum::tree_sum(std::span<const double>(terms));
            models[it] = h;
            valid[it] = 1;
        }
    });

    // Winner by (score descending, iteration ascending) total order.
    MagsacResult result;
    int best_it = -1;
    for (int it = 0; it < iterations; ++it) {
        if (!valid[it]) continue;
        if (best_it < 0 || scores[it] > scores[best_it]) best_it = it;
    }
    if (best_it < 0) return result;

    const Homography best = models[best_it];
    Homography best_inv;
    try {
        best_inv = best.inverse();
    } catch (const std::exception&) {
        return result;
    }
    std::vector<Correspondence> soft_inliers;
    std::vector<double> weights;
    for (size_t i = 0; i < n; ++i) {
        const double r2 = symmetric_error_sq(best, best_inv, matches[i]);
        if (r2 < tau_sq) {
            soft_inliers.push_back(matches[i]);
            weights.push_back(1.0 - r2 / tau_sq);
        }
    }
    if (soft_inliers.size() < 4) return result;

    Homography refit;
    try {
        refit = dlt_homography(soft_inliers, weights);
    } catch (const std::exception&) {
        return result;
    }
    Homography refit_inv;
    try {
        refit_inv = refit.inverse();
    } catch (const std::exception&) {
        return result;
    }

    result.success = true;
    result.h = refit;
    result.score = scores[best_it];
    result.best_iteration = best_it;
    result.inlier_mask.resize(n, 0);
    for (size_t i = 0; i < n; ++i) {
        const double r2 = symmetric_error_sq(refit, refit_inv, matches[i]);
        result.inlier_mask[i] = r2 < tau_sq ? 1 : 0;
    }
    return result;
}

double corner_error(const Homography& h_est, const Homography& h_gt, double width,
                    double height) {
    const double corners[4][2] = {{0, 0}, {width, 0}, {width, height}, {0, height}};
    double sum = 0.0;
    for (const auto& c : corners) {
        double ex, ey, gx, gy;
        h_est.apply(c[0], c[1], ex, ey);
        h_gt.apply(c[0], c[1], gx, gy);
        sum += std::hypot(ex - gx, ey - gy);
    }
    return sum / 4.0;
}

void write_homography(const Homography& h, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.precision(17);
    for (int r = 0; r < 3; ++r) {
        out << h(r, 0) << " " << h(r, 1) << " " << h(r, 2) << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

Homography read_homography(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    Homography h;
    for (int i = 0; i < 9; ++i) {
        if (!(in >> h.h[i])) throw std::runtime_error("homography file: expected 9 numbers");
    }
    return h;
}

}  // namespace detsift
