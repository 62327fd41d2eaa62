#include "detsift/scalespace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "detsift/parallel.hpp"

namespace detsift {

double ScaleSpace::level_sigma(int interval) const {
    return sigma0 * std::pow(2.0, double(interval) / intervals);
}

double ScaleSpace::octave_to_input_scale(int octave) const {
    return std::ldexp(1.0, octave) * (upsampled ? 0.5 : 1.0);
}

bool will_upsample(const GrayImage& img, const SiftConfig& cfg) {
    return int64_t(img.width) * img.height <= cfg.upsample_pixel_limit;
}

std::vector<float> gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be > 0");
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> raw(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        raw[k + radius] = std::exp(-double(k) * k / (2.0 * sigma * sigma));
        sum += raw[k + radius];
    }
    std::vector<float> kernel(raw.size());
    for (size_t i = 0; i < raw.size(); ++i)
        kernel[i] = static_cast<float>(raw[i] / sum);
    return kernel;
}

namespace {

// reflect-101: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
inline int reflect(int p, int n) {
    if (n == 1) return 0;
    while (p < 0 || p >= n) {
        if (p < 0) p = -p;
        if (p >= n) p = 2 * n - 2 - p;
    }
    return p;
}

}  // namespace

GrayImage convolve_separable(const GrayImage& img, std::span<const float> kernel,
                             int workers) {
    const int len = static_cast<int>(kernel.size());
    if (len == 0 || len % 2 == 0)
        throw std::invalid_argument("convolve_separable: kernel must have odd length");
    if (len > 2 * std::max(img.width, img.height) + 1)
        throw std::invalid_argument("convolve_separable: kernel longer than image allows");
    const int radius = len / 2;
    const int w = img.width, h = img.height;

    GrayImage tmp(w, h);
    parallel_for(h, workers, [&](int64_t y0, int64_t y1) {
        for (int y = static_cast<int>(y0); y < y1; ++y) {
            const float* src = img.row(y);
            float* dst = tmp.row(y);
            const int lo = radius, hi = w - radius;  // interior: no reflection needed
            for (int x = 0; x < std::min(lo, w); ++x) {
                double acc = 0.0;
                for (int k = 0; k < len; ++k)
                    acc += double(kernel[k]) * src[reflect(x + k - radius, w)];
                dst[x] = static_cast<float>(acc);
            }
            for (int x = lo; x < hi; ++x) {
                double acc = 0.0;
                const float* p = src + x - radius;
                for (int k = 0; k < len; ++k) acc += double(kernel[k]) * p[k];
                dst[x] = static_cast<float>(acc);
            }
            for (int x = std::max(hi, lo); x < w; ++x) {
                double acc = 0.0;
                for (int k = 0; k < len; ++k)
                    acc += double(kernel[k]) * src[reflect(x + k - radius, w)];
                dst[x] = static_cast<float>(acc);
            }
        }
    });

    GrayImage out(w, h);
    parallel_for(h, workers, [&](int64_t y0, int64_t y1) {
        for (int y = static_cast<int>(y0); y < y1; ++y) {
            float* dst = out.row(y);
            if (y >= radius && y + radius < h) {
                for (int x = 0; x < w; ++x) {
                    double acc = 0.0;
                    const float* p = tmp.data.data() + size_t(y - radius) * w + x;
                    for (int k = 0; k < len; ++k) acc += double(kernel[k]) * p[size_t(k) * w];
                    dst[x] = static_cast<float>(acc);
                }
            } else {
                for (int x = 0; x < w; ++x) {
                    double acc = 0.0;
                    for (int k = 0; k < len; ++k)
                        acc += double(kernel[k]) * tmp.at(x, reflect(y + k - radius, h));
                    dst[x] = static_cast<float>(acc);
                }
            }
        }
    });
    return out;
}

GrayImage upsample2x(const GrayImage& img) {
    const int w = img.width, h = img.height;
    GrayImage out(2 * w, 2 * h);
    for (int y = 0; y < 2 * h; ++y) {
        const int y0 = y / 2;
        const bool half_y = (y & 1) != 0;
        const int y1 = std::min(y0 + 1, h - 1);
        float* dst = out.row(y);
        const float* r0 = img.row(y0);
        const float* r1 = img.row(half_y ? y1 : y0);
        for (int x = 0; x < 2 * w; ++x) {
            const int x0 = x / 2;
            const int x1 = (x & 1) ? std::min(x0 + 1, w - 1) : x0;
            const double v = 0.25 * (double(r0[x0]) + r0[x1] + r1[x0] + r1[x1]);
            dst[x] = static_cast<float>(v);
        }
    }
    return out;
}

GrayImage decimate2x(const GrayImage& img) {
    const int w = img.width / 2, h = img.height / 2;
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
        const float* src = img.row(2 * y);
        float* dst = out.row(y);
        for (int x = 0; x < w; ++x) dst[x] = src[2 * x];
    }
    return out;
}

ScaleSpace build_scale_space(const GrayImage& img, const SiftConfig& cfg, int workers) {
    cfg.validate();
    if (img.empty()) throw std::invalid_argument("build_scale_space: empty image");

    ScaleSpace ss;
    ss.intervals = cfg.intervals_per_octave;
    ss.sigma0 = cfg.sigma0;
    ss.upsampled = will_upsample(img, cfg);

    GrayImage base = ss.upsampled ? upsample2x(img) : img;
    const double assumed = ss.upsampled ? 2.0 * cfg.assumed_input_blur : cfg.assumed_input_blur;
    if (!(double(cfg.sigma0) > assumed))
        throw std::invalid_argument("build_scale_space: effective input blur exceeds sigma0");
    if (std::min(base.width, base.height) < 8)
        throw std::invalid_argument("build_scale_space: image smaller than 8x8 after upsampling policy");

    const int s = cfg.intervals_per_octave;
    const int min_dim = std::min(base.width, base.height);
    int auto_octaves = -2;
    for (int d = min_dim; d > 1; d /= 2) ++auto_octaves;  // floor(log2(min_dim)) - 2
    auto_octaves = std::max(1, auto_octaves);

    const double bridge =
        std::sqrt(double(cfg.sigma0) * cfg.sigma0 - assumed * assumed);

    // Largest kernel the ladder ever applies; octaves whose max dimension
    // cannot host it are dropped so the convolution length gate never trips.
    std::vector<double> inc_sigmas;
    for (int i = 1; i < s + 3; ++i)
        inc_sigmas.push_back(cfg.sigma0 * std::pow(2.0, double(i - 1) / s) *
                             std::sqrt(std::pow(2.0, 2.0 / s) - 1.0));
    int max_radius = static_cast<int>(std::ceil(4.0 * bridge));
    for (double sg : inc_sigmas)
        max_radius = std::max(max_radius, static_cast<int>(std::ceil(4.0 * sg)));
    if (std::max(base.width, base.height) < max_radius)
        throw std::invalid_argument("build_scale_space: image too small for the blur ladder");
    int feasible = 1;
    for (int w = base.width / 2, h = base.height / 2;
         std::min(w, h) >= 8 && std::max(w, h) >= max_radius; w /= 2, h /= 2)
        ++feasible;

    int octaves = cfg.num_octaves > 0 ? std::min(cfg.num_octaves, auto_octaves)
                                      : auto_octaves;
    octaves = std::min(octaves, feasible);

    ss.octaves.resize(octaves);
    for (int o = 0; o < octaves; ++o) {
        auto& oct = ss.octaves[o];
        oct.gauss.reserve(s + 3);
        if (o == 0) {
            oct.gauss.push_back(convolve_separable(base, gaussian_kernel(bridge), workers));
        } else {
            // Level s sits at exactly 2*sigma0 on its own grid; decimation
            // halves the grid so the seed lands back on sigma0.
            oct.gauss.push_back(decimate2x(ss.octaves[o - 1].gauss[s]));
        }
        for (int i = 1; i < s + 3; ++i) {
            oct.gauss.push_back(convolve_separable(
                oct.gauss.back(), gaussian_kernel(inc_sigmas[i - 1]), workers));
        }
        oct.dog.reserve(s + 2);
        for (int i = 0; i < s + 2; ++i) {
            const GrayImage& lo = oct.gauss[i];
            const GrayImage& hi = oct.gauss[i + 1];
            GrayImage d(lo.width, lo.height);
            for (size_t p = 0; p < d.size(); ++p) d.data[p] = hi.data[p] - lo.data[p];
            oct.dog.push_back(std::move(d));
        }
    }
    return ss;
}

}  // namespace detsift
