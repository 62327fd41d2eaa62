#include "detsift/match.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "detsift/detsum.hpp"
#include "detsift/linalg.hpp"
#include "detsift/parallel.hpp"

namespace detsift {

namespace {

float tree_dot(std::span<const float> a, std::span<const float> b) {
    thread_local std::vector<float> prod;
    prod.resize(a.size());
    for (size_t i = 0; i < a.size(); ++i) prod[i] = a[i] * b[i];
    return detsum::tree_sum(std::span<const float>(prod));
}

std::vector<float> squared_norms(const FeatureSet& fs) {
    std::vector<float> out(fs.size());
    for (size_t i = 0; i < fs.size(); ++i) {
        auto r = fs.row(i);
        out[i] = tree_dot(r, r);
    }
    return out;
}

struct NearestTwo {
    int best = -1;
    float best_d = 0.0f;
    float second_d = 0.0f;
    bool has_second = false;
};

// Nearest and second-nearest by (distance, index) order over fs_b.
NearestTwo scan_row(const FeatureSet& a, size_t ia, const FeatureSet& b,
                    std::span<const float> na, std::span<const float> nb) {
    NearestTwo r;
    const auto row_a = a.row(ia);
    float d1 = std::numeric_limits<float>::infinity();
    float d2 = std::numeric_limits<float>::infinity();
    int arg = -1;
    for (size_t j = 0; j < b.size(); ++j) {
        float sq = na[ia] + nb[j] - 2.0f * tree_dot(row_a, b.row(j));
        if (sq < 0.0f) sq = 0.0f;
        const float d = std::sqrt(sq);
        if (d < d1) {
            d2 = d1;
            d1 = d;
            arg = static_cast<int>(j);
        } else if (d < d2) {
            d2 = d;
        }
    }
    r.best = arg;
    r.best_d = d1;
    r.second_d = d2;
    r.has_second = b.size() >= 2;
    return r;
}

}  // namespace

float descriptor_distance(std::span<const float> a, std::span<const float> b) {
    float sq = tree_dot(a, a) + tree_dot(b, b) - 2.0f * tree_dot(a, b);
    if (sq < 0.0f) sq = 0.0f;
    return std::sqrt(sq);
}

MatchSet ratio_match(const FeatureSet& a, const FeatureSet& b, float ratio, int workers) {
    if (a.dim != b.dim) throw std::invalid_argument("ratio_match: dimension mismatch");
    if (!(ratio > 0.0f) || ratio > 1.0f)
        throw std::invalid_argument("ratio_match: ratio must be in (0,1]");

    MatchSet out;
    if (a.size() < 2 || b.size() < 2) return out;

    const std::vector<float> na = squared_norms(a);
    const std::vector<float> nb = squared_norms(b);

    std::vector<int> best_a(a.size(), -1);  // passing A->B choice, else -1
    std::vector<float> dist_a(a.size(), 0.0f);
    parallel_for(static_cast<int64_t>(a.size()), workers, [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
            const NearestTwo r = scan_row(a, i, b, na, nb);
            if (r.best >= 0 && r.best_d < ratio * r.second_d) {
                best_a[i] = r.best;
                dist_a[i] = r.best_d;
            }
        }
    });
    std::vector<int> best_b(b.size(), -1);
    parallel_for(static_cast<int64_t>(b.size()), workers, [&](int64_t lo, int64_t hi) {
        for (int64_t j = lo; j < hi; ++j) {
            const NearestTwo r = scan_row(b, j, a, nb, na);
            if (r.best >= 0 && r.best_d < ratio * r.second_d) best_b[j] = r.best;
        }
    });

    for (size_t i = 0; i < a.size(); ++i) {
        if (best_a[i] >= 0) ++out.putative_a;
    }
    for (size_t j = 0; j < b.size(); ++j) {
        if (best_b[j] >= 0) ++out.putative_b;
    }
    for (size_t i = 0; i < a.size(); ++i) {
        const int j = best_a[i];
        if (j >= 0 && best_b[j] == static_cast<int>(i))
            out.pairs.push_back({static_cast<int32_t>(i), j, dist_a[i]});
    }
    return out;
}

std::tuple<FeatureSet, FeatureSet, PcaProjection> pca_compress(const FeatureSet& a,
                                                               const FeatureSet& b,
                                                               int out_dim) {
    const int dim = a.dim;
    if (b.dim != dim) throw std::invalid_argument("pca_compress: dimension mismatch");
    const size_t total = a.size() + b.size();
    if (out_dim <= 0 || out_dim >= dim)
        throw std::invalid_argument("pca_compress: out_dim must be in (0, dim)");
    if (total < static_cast<size_t>(out_dim))
        throw std::invalid_argument("pca_compress: not enough descriptors");

    auto row_of = [&](size_t i) {
        return i < a.size() ? a.row(i) : b.row(i - a.size());
    };

    // Mean per dimension over the concatenated rows, fixed-tree reduced.
    std::vector<float> mean(dim, 0.0f);
    std::vector<float> column(total);
    for (int d = 0; d < dim; ++d) {
        for (size_t i = 0; i < total; ++i) column[i] = row_of(i)[d];
        mean[d] = detsum::tree_sum(std::span<const float>(column)) /
                  static_cast<float>(total);
    }

    // Scatter matrix in double, rows accumulated in canonical order.
    std::vector<double> cov(size_t(dim) * dim, 0.0);
    std::vector<double> centered(dim);
    for (size_t i = 0; i < total; ++i) {
        auto r = row_of(i);
        for (int d = 0; d < dim; ++d) centered[d] = double(r[d]) - mean[d];
        for (int p = 0; p < dim; ++p) {
            const double cp = centered[p];
            for (int q = p; q < dim; ++q) cov[size_t(p) * dim + q] += cp * centered[q];
        }
    }
    for (int p = 0; p < dim; ++p)
        for (int q = 0; q < p; ++q) cov[size_t(p) * dim + q] = cov[size_t(q) * dim + p];
    const double denom = static_cast<double>(total);
    for (double& v : cov) v /= denom;

    const SymEigen eig = jacobi_eigen_sym(cov, dim);
    const double lead = std::max(eig.values[0], 0.0);
    const double positive_gate = lead > 0.0 ? lead * 1e-9 : 0.0;
    int rank = 0;
    for (int k = 0; k < dim; ++k)
        if (eig.values[k] > positive_gate && eig.values[k] > 0.0) ++rank;
    if (rank < out_dim)
        throw std::runtime_error("pca_compress: covariance rank " + std::to_string(rank) +
                                 " is below requested dimension " + std::to_string(out_dim));

    PcaProjection proj;
    proj.in_dim = dim;
    proj.out_dim = out_dim;
    proj.mean = mean;
    proj.basis.resize(size_t(out_dim) * dim);
    for (int k = 0; k < out_dim; ++k)
        for (int d = 0; d < dim; ++d)
            proj.basis[size_t(k) * dim + d] =
                static_cast<float>(eig.vectors[size_t(k) * dim + d]);

    auto project = [&](const FeatureSet& src) {
        FeatureSet dst;
        dst.keypoints = src.keypoints;
        dst.dim = out_dim;
        dst.descriptors.resize(src.size() * out_dim);
        std::vector<float> cen(dim);
        for (size_t i = 0; i < src.size(); ++i) {
            auto r = src.row(i);
            for (int d = 0; d < dim; ++d) cen[d] = r[d] - mean[d];
            for (int k = 0; k < out_dim; ++k) {
                dst.descriptors[i * out_dim + k] = tree_dot(
                    cen, std::span<const float>(proj.basis.data() + size_t(k) * dim,
                                                static_cast<size_t>(dim)));
            }
        }
        return dst;
    };
    return {project(a), project(b), std::move(proj)};
}

namespace {

std::string float_to_string(float v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

}  // namespace

void write_matches(const MatchSet& matches, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "# detsift-matches v1 count=" << matches.pairs.size() << "\n";
    for (const auto& m : matches.pairs)
        out << m.a << " " << m.b << " " << float_to_string(m.distance) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

MatchSet read_matches(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string header;
    if (!std::getline(in, header) || header.rfind("# detsift-matches v1", 0) != 0)
        throw std::runtime_error("match file: bad header");
    MatchSet out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        Match m;
        if (!(ss >> m.a >> m.b >> m.distance))
            throw std::runtime_error("match file: malformed line");
        out.pairs.push_back(m);
    }
    return out;
}

}  // namespace detsift
