#include "detsift/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "detsift/describe.hpp"
#include "detsift/detect.hpp"
#include "detsift/orient.hpp"
#include "detsift/parallel.hpp"
#include "detsift/scalespace.hpp"

namespace detsift {

namespace {

// Next whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

int parse_dim(const std::string& tok, const char* what) {
    try {
        const int v = std::stoi(tok);
        if (v <= 0) throw std::runtime_error("");
        return v;
    } catch (...) {
        throw std::runtime_error(std::string("image: bad ") + what);
    }
}

}  // namespace

GrayImage load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);

    const std::string magic = next_token(in);
    if (magic != "P5" && magic != "P6")
        throw std::runtime_error("image: unsupported format '" + magic + "' (want P5/P6)");
    const bool color = magic == "P6";
    const int width = parse_dim(next_token(in), "width");
    const int height = parse_dim(next_token(in), "height");
    const int maxval = parse_dim(next_token(in), "maxval");
    if (maxval != 255) throw std::runtime_error("image: maxval must be 255");

    const size_t pixels = size_t(width) * height;
    const size_t payload = pixels * (color ? 3 : 1);
    std::vector<uint8_t> bytes(payload);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(payload));
    if (static_cast<size_t>(in.gcount()) != payload)
        throw std::runtime_error("image: truncated payload");

    GrayImage img(width, height);
    if (color) {
        for (size_t i = 0; i < pixels; ++i) {
            const double r = bytes[3 * i], g = bytes[3 * i + 1], b = bytes[3 * i + 2];
            img.data[i] =
                static_cast<float>((0.299 * r + 0.587 * g + 0.114 * b) * (1.0 / 255.0));
        }
    } else {
        for (size_t i = 0; i < pixels; ++i)
            img.data[i] = static_cast<float>(bytes[i] * (1.0 / 255.0));
    }
    return img;
}

namespace {

uint8_t to_byte(float v) {
    const float clamped = std::min(1.0f, std::max(0.0f, v));
    return static_cast<uint8_t>(std::lround(clamped * 255.0f));
}

}  // namespace

void write_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    for (float v : img.data) out.put(static_cast<char>(to_byte(v)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_ppm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    for (float v : img.data) {
        const char b = static_cast<char>(to_byte(v));
        out.put(b).put(b).put(b);
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

FeatureSet extract(const GrayImage& img, const SiftConfig& cfg, int workers) {
    const ScaleSpace ss = build_scale_space(img, cfg, workers);
    const std::vector<Keypoint> detected = detect_keypoints(ss, cfg, workers);

    // Orientation fan-out: per-candidate slots keep the flattened order
    // canonical for any worker count.
    std::vector<std::vector<Keypoint>> oriented(detected.size());
    parallel_for(static_cast<int64_t>(detected.size()), workers,
                 [&](int64_t lo, int64_t hi) {
                     for (int64_t i = lo; i < hi; ++i)
                         oriented[i] = assign_orientations(ss, detected[i], cfg, workers);
                 });
    std::vector<Keypoint> keypoints;
    for (const auto& group : oriented)
        keypoints.insert(keypoints.end(), group.begin(), group.end());

    FeatureSet fs;
    fs.dim = kDescriptorDim;
    fs.keypoints = keypoints;
    fs.descriptors.resize(keypoints.size() * size_t(kDescriptorDim));
    parallel_for(static_cast<int64_t>(keypoints.size()), workers,
                 [&](int64_t lo, int64_t hi) {
                     for (int64_t i = lo; i < hi; ++i) {
                         const std::vector<float> d =
                             dsp_descriptor(ss, keypoints[i], cfg, workers);
                         std::copy(d.begin(), d.end(),
                                   fs.descriptors.begin() + i * kDescriptorDim);
                     }
                 });
    canonical_sort(fs);
    return fs;
}

}  // namespace detsift
