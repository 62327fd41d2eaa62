#include "detsift/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace detsift {

static_assert(std::endian::native == std::endian::little,
              "feature file layout assumes a little-endian host");

void SiftConfig::validate() const {
    if (!(sigma0 > 0.0f) || !(assumed_input_blur >= 0.0f) || !(sigma0 > assumed_input_blur))
        throw std::invalid_argument("config: require sigma0 > assumed_input_blur >= 0");
    if (intervals_per_octave < 1)
        throw std::invalid_argument("config: intervals_per_octave must be >= 1");
    if (!(contrast_threshold > 0.0f))
        throw std::invalid_argument("config: contrast_threshold must be > 0");
    if (!(edge_ratio > 1.0f))
        throw std::invalid_argument("config: edge_ratio must be > 1");
    if (max_refine_iters < 1)
        throw std::invalid_argument("config: max_refine_iters must be >= 1");
    if (upsample_pixel_limit < 0)
        throw std::invalid_argument("config: upsample_pixel_limit must be >= 0");
    if (dsp_scales.empty())
        throw std::invalid_argument("config: dsp_scales must be nonempty");
    for (size_t i = 0; i < dsp_scales.size(); ++i) {
        if (!(dsp_scales[i] > 0.0))
            throw std::invalid_argument("config: dsp_scales must all be > 0");
        if (i > 0 && !(dsp_scales[i] > dsp_scales[i - 1]))
            throw std::invalid_argument("config: dsp_scales must be strictly increasing");
    }
    if (!(descriptor_clip > 0.0f))
        throw std::invalid_argument("config: descriptor_clip must be > 0");
    if (orientation_bins < 2)
        throw std::invalid_argument("config: orientation_bins must be >= 2");
    if (!(orientation_peak_ratio > 0.0f) || orientation_peak_ratio > 1.0f)
        throw std::invalid_argument("config: orientation_peak_ratio must be in (0,1]");
    if (num_octaves < 0)
        throw std::invalid_argument("config: num_octaves must be >= 0 (0 = auto)");
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<double> parse_scale_list(const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

}  // namespace

void apply_config_entry(SiftConfig& cfg, const std::string& key, const std::string& value) {
    try {
        if (key == "sigma0") cfg.sigma0 = std::stof(value);
        else if (key == "intervals_per_octave") cfg.intervals_per_octave = std::stoi(value);
        else if (key == "assumed_input_blur") cfg.assumed_input_blur = std::stof(value);
        else if (key == "contrast_threshold") cfg.contrast_threshold = std::stof(value);
        else if (key == "edge_ratio") cfg.edge_ratio = std::stof(value);
        else if (key == "max_refine_iters") cfg.max_refine_iters = std::stoi(value);
        else if (key == "upsample_pixel_limit") cfg.upsample_pixel_limit = std::stoll(value);
        else if (key == "dsp_scales") cfg.dsp_scales = parse_scale_list(value);
        else if (key == "descriptor_clip") cfg.descriptor_clip = std::stof(value);
        else if (key == "orientation_bins") cfg.orientation_bins = std::stoi(value);
        else if (key == "orientation_peak_ratio") cfg.orientation_peak_ratio = std::stof(value);
        else if (key == "num_octaves") cfg.num_octaves = (value == "auto") ? 0 : std::stoi(value);
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad value for '" + key + "': " + value);
    }
}

SiftConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    SiftConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: missing '=' at line " + std::to_string(lineno));
        apply_config_entry(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

namespace {

// Total order over keypoints. Descriptor bytes act as the last tie-breaker so
// fully identical sort keys cannot yield a permutation-dependent sequence.
bool keypoint_less(const FeatureSet& fs, size_t i, size_t j) {
    const Keypoint& a = fs.keypoints[i];
    const Keypoint& b = fs.keypoints[j];
    if (a.octave != b.octave) return a.octave < b.octave;
    if (a.interval != b.interval) return a.interval < b.interval;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    if (a.angle != b.angle) return a.angle < b.angle;
    if (a.sigma != b.sigma) return a.sigma < b.sigma;
    if (a.response != b.response) return a.response < b.response;
    auto ra = fs.row(i), rb = fs.row(j);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
}

std::vector<size_t> canonical_permutation(const FeatureSet& fs) {
    std::vector<size_t> order(fs.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&fs](size_t i, size_t j) { return keypoint_less(fs, i, j); });
    return order;
}

template <typename T>
void append_raw(std::vector<uint8_t>& out, const T& v) {
    const auto* p = reinterpret_cast<const uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T read_raw(const std::vector<uint8_t>& in, size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw std::runtime_error("feature file: truncated payload");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

constexpr char kMagic[4] = {'D', 'S', 'F', '1'};
constexpr uint32_t kVersion = 1;

}  // namespace

void canonical_sort(FeatureSet& features) {
    const std::vector<size_t> order = canonical_permutation(features);
    FeatureSet sorted;
    sorted.dim = features.dim;
    sorted.keypoints.reserve(features.size());
    sorted.descriptors.reserve(features.descriptors.size());
    for (size_t i : order) {
        sorted.keypoints.push_back(features.keypoints[i]);
        auto r = features.row(i);
        sorted.descriptors.insert(sorted.descriptors.end(), r.begin(), r.end());
    }
    features = std::move(sorted);
}

std::vector<uint8_t> serialize_features(const FeatureSet& features) {
    const std::vector<size_t> order = canonical_permutation(features);
    std::vector<uint8_t> out;
    out.reserve(16 + features.size() * (28 + features.dim * 4));
    out.insert(out.end(), kMagic, kMagic + 4);
    append_raw(out, kVersion);
    append_raw(out, static_cast<uint32_t>(features.size()));
    append_raw(out, static_cast<uint32_t>(features.dim));
    for (size_t i : order) {
        const Keypoint& k = features.keypoints[i];
        append_raw(out, k.x);
        append_raw(out, k.y);
        append_raw(out, k.sigma);
        append_raw(out, k.angle);
        append_raw(out, k.response);
        append_raw(out, k.octave);
        append_raw(out, k.interval);
    }
    for (size_t i : order) {
        auto r = features.row(i);
        const auto* p = reinterpret_cast<const uint8_t*>(r.data());
        out.insert(out.end(), p, p + r.size() * sizeof(float));
    }
    return out;
}

void write_features(const FeatureSet& features, const std::string& path) {
    const std::vector<uint8_t> bytes = serialize_features(features);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

FeatureSet read_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    size_t pos = 0;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw std::runtime_error("feature file: bad magic");
    pos = 4;
    const uint32_t version = read_raw<uint32_t>(bytes, pos);
    if (version != kVersion)
        throw std::runtime_error("feature file: unsupported version " + std::to_string(version));
    const uint32_t count = read_raw<uint32_t>(bytes, pos);
    const uint32_t dim = read_raw<uint32_t>(bytes, pos);
    if (dim == 0 || dim > 4096) throw std::runtime_error("feature file: implausible dim");
    const uint64_t need = 16ull + uint64_t(count) * (28ull + uint64_t(dim) * 4ull);
    if (bytes.size() < need) throw std::runtime_error("feature file: truncated payload");
    if (bytes.size() > need) throw std::runtime_error("feature file: trailing data");

    FeatureSet fs;
    fs.dim = static_cast<int>(dim);
    fs.keypoints.resize(count);
    for (uint32_t i = 0; i < count; ++i) {
        Keypoint& k = fs.keypoints[i];
        k.x = read_raw<float>(bytes, pos);
        k.y = read_raw<float>(bytes, pos);
        k.sigma = read_raw<float>(bytes, pos);
        k.angle = read_raw<float>(bytes, pos);
        k.response = read_raw<float>(bytes, pos);
        k.octave = read_raw<int32_t>(bytes, pos);
        k.interval = read_raw<int32_t>(bytes, pos);
    }
    fs.descriptors.resize(size_t(count) * dim);
    if (!fs.descriptors.empty()) {
        std::memcpy(fs.descriptors.data(), bytes.data() + pos, fs.descriptors.size() * 4);
    }
    return fs;
}

}  // namespace detsift
