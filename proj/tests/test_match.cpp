#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "detsift/geom.hpp"
#include "detsift/match.hpp"
#include "support/oracles.hpp"

using namespace detsift;

namespace {

FeatureSet random_set(size_t count, int dim, uint64_t seed) {
    FeatureSet fs;
    fs.dim = dim;
    fs.keypoints.resize(count);
    SplitMix64 rng(seed);
    for (size_t i = 0; i < count * dim; ++i)
        fs.descriptors.push_back(float(rng.next() >> 40) / float(1 << 24));
    return fs;
}

bool same_pairs(const MatchSet& a, const MatchSet& b) {
    if (a.pairs.size() != b.pairs.size()) return false;
    for (size_t i = 0; i < a.pairs.size(); ++i)
        if (a.pairs[i].a != b.pairs[i].a || a.pairs[i].b != b.pairs[i].b ||
            a.pairs[i].distance != b.pairs[i].distance)
            return false;
    return true;
}

}  // namespace

TEST_CASE("ratio gate arithmetic") {
    // d1/d2 = 0.4 passes at 0.8; 0.9 fails.
    CHECK(0.2f < 0.8f * 0.5f);
    CHECK_FALSE(0.45f < 0.8f * 0.5f);
}

TEST_CASE("self-match maps every distinct descriptor to itself") {
    const FeatureSet fs = random_set(20, 16, 11);
    const MatchSet m = ratio_match(fs, fs, 1.0f);
    REQUIRE(m.pairs.size() == fs.size());
    for (const auto& p : m.pairs) {
        CHECK(p.a == p.b);
        CHECK(p.distance == 0.0f);
    }
}

TEST_CASE("mutual filter drops one-sided choices") {
    // b0 is closest to both a0 and a1, but b0's best is a0 only.
    FeatureSet a, b;
    a.dim = b.dim = 2;
    a.keypoints.resize(3);
    b.keypoints.resize(3);
    a.descriptors = {0.0f, 0.0f, 0.1f, 0.0f, 5.0f, 5.0f};
    b.descriptors = {0.01f, 0.0f, 2.0f, 2.0f, 5.0f, 5.1f};
    const MatchSet m = ratio_match(a, b, 0.8f);
    for (const auto& p : m.pairs) {
        if (p.a == 1) CHECK(p.b != 0);  // a1 cannot keep b0: b0 chose a0
    }
    // a0 <-> b0 must survive.
    REQUIRE(!m.pairs.empty());
    CHECK(m.pairs[0].a == 0);
    CHECK(m.pairs[0].b == 0);
}

TEST_CASE("degenerate inputs give an empty match set") {
    const FeatureSet one = random_set(1, 8, 5);
    const FeatureSet many = random_set(10, 8, 6);
    CHECK(ratio_match(one, many, 0.8f).pairs.empty());
    CHECK(ratio_match(many, one, 0.8f).pairs.empty());
}

TEST_CASE("matcher equals the exhaustive oracle, including tie cases") {
    SplitMix64 seeds(0xBEEF);
    for (int instance = 0; instance < 25; ++instance) {
        const size_t n = 2 + seeds.next() % 49;
        const size_t m = 2 + seeds.next() % 49;
        FeatureSet a = random_set(n, 8, seeds.next());
        FeatureSet b = random_set(m, 8, seeds.next());
        // Inject duplicates to force exact distance ties.
        if (m >= 4 && n >= 2) {
            std::copy_n(b.descriptors.begin(), b.dim, b.descriptors.begin() + b.dim);
            std::copy_n(a.descriptors.begin(), a.dim,
                        b.descriptors.begin() + 2 * b.dim);
        }
        const MatchSet ours = ratio_match(a, b, 0.8f);
        const MatchSet oracle = oracles::naive_ratio_match(a, b, 0.8f);
        CHECK(same_pairs(ours, oracle));
        CHECK(ours.putative_a == oracle.putative_a);
        CHECK(ours.putative_b == oracle.putative_b);
    }
}

TEST_CASE("mutual pair set is symmetric under swapping inputs") {
    const FeatureSet a = random_set(30, 8, 100);
    const FeatureSet b = random_set(25, 8, 200);
    const MatchSet ab = ratio_match(a, b, 0.8f);
    MatchSet ba = ratio_match(b, a, 0.8f);
    for (auto& p : ba.pairs) std::swap(p.a, p.b);
    std::sort(ba.pairs.begin(), ba.pairs.end(),
              [](const Match& x, const Match& y) { return x.a < y.a; });
    CHECK(same_pairs(ab, ba));
}

TEST_CASE("matching is identical across worker counts") {
    const FeatureSet a = random_set(120, 32, 1);
    const FeatureSet b = random_set(110, 32, 2);
    const MatchSet base = ratio_match(a, b, 0.8f, 1);
    for (int w : {2, 3, 8}) CHECK(same_pairs(base, ratio_match(a, b, 0.8f, w)));
}

TEST_CASE("match file round-trip") {
    MatchSet m;
    m.pairs = {{0, 3, 0.25f}, {2, 1, 1.5f}};
    const auto path =
        (std::filesystem::temp_directory_path() / "detsift_test_matches.txt").string();
    write_matches(m, path);
    const MatchSet back = read_matches(path);
    CHECK(same_pairs(m, back));
    std::filesystem::remove(path);
}

TEST_CASE("pca: plane-embedded descriptors reconstruct exactly") {
    // 3-D descriptors on a 2-D plane through known orthonormal axes.
    const float e1[3] = {1.0f / std::sqrt(2.0f), 1.0f / std::sqrt(2.0f), 0.0f};
    const float e2[3] = {0.0f, 0.0f, 1.0f};
    FeatureSet a, b;
    a.dim = b.dim = 3;
    SplitMix64 rng(31);
    auto uniform = [&rng] { return float(rng.next() >> 40) / float(1 << 24) - 0.5f; };
    for (int i = 0; i < 20; ++i) {
        const float u = uniform() * 4.0f, v = uniform() * 2.0f;
        FeatureSet& dst = i % 2 ? a : b;
        for (int d = 0; d < 3; ++d)
            dst.descriptors.push_back(0.25f + u * e1[d] + v * e2[d]);
        dst.keypoints.emplace_back();
    }
    auto [pa, pb, proj] = pca_compress(a, b, 2);
    CHECK(pa.dim == 2);
    CHECK(pb.dim == 2);

    // Reconstruction through the returned basis must reproduce the data.
    auto check_reconstruction = [&](const FeatureSet& orig, const FeatureSet& compressed) {
        for (size_t i = 0; i < orig.size(); ++i) {
            for (int d = 0; d < 3; ++d) {
                double rec = proj.mean[d];
                for (int k = 0; k < 2; ++k)
                    rec += double(compressed.row(i)[k]) * proj.basis[size_t(k) * 3 + d];
                CHECK(std::fabs(rec - orig.row(i)[d]) < 1e-6);
            }
        }
    };
    check_reconstruction(a, pa);
    check_reconstruction(b, pb);

    // The projection basis spans the construction plane.
    for (int k = 0; k < 2; ++k) {
        const float* w = proj.basis.data() + size_t(k) * 3;
        const double in_plane = std::fabs(double(w[0]) * e1[0] + w[1] * e1[1] + w[2] * e1[2]) +
                                std::fabs(double(w[0]) * e2[0] + w[1] * e2[1] + w[2] * e2[2]);
        CHECK(in_plane > 0.999);
    }
}

TEST_CASE("pca: identical descriptors raise a rank error") {
    FeatureSet a, b;
    a.dim = b.dim = 4;
    for (int i = 0; i < 6; ++i) {
        (i % 2 ? a : b).descriptors.insert((i % 2 ? a : b).descriptors.end(),
                                           {0.5f, 0.25f, 0.125f, 1.0f});
        (i % 2 ? a : b).keypoints.emplace_back();
    }
    CHECK_THROWS_WITH_AS(pca_compress(a, b, 2), doctest::Contains("rank"),
                         std::runtime_error);
}

TEST_CASE("pca preserves distance ordering on plane data") {
    FeatureSet a, b;
    a.dim = b.dim = 8;
    SplitMix64 rng(7);
    auto uniform = [&rng] { return float(rng.next() >> 40) / float(1 << 24) - 0.5f; };
    // Rank-3 data in 8-D.
    float basis[3][8];
    for (auto& row : basis)
        for (float& v : row) v = uniform();
    for (int i = 0; i < 16; ++i) {
        FeatureSet& dst = i % 2 ? a : b;
        float coeff[3] = {uniform(), uniform(), uniform()};
        for (int d = 0; d < 8; ++d)
            dst.descriptors.push_back(coeff[0] * basis[0][d] + coeff[1] * basis[1][d] +
                                      coeff[2] * basis[2][d]);
        dst.keypoints.emplace_back();
    }
    auto [pa, pb, proj] = pca_compress(a, b, 3);

    auto order = [](const FeatureSet& x, const FeatureSet& y) {
        std::vector<std::pair<float, std::pair<int, int>>> d;
        for (size_t i = 0; i < x.size(); ++i)
            for (size_t j = 0; j < y.size(); ++j)
                d.push_back({descriptor_distance(x.row(i), y.row(j)), {int(i), int(j)}});
        std::sort(d.begin(), d.end());
        std::vector<std::pair<int, int>> idx;
        for (auto& e : d) idx.push_back(e.second);
        return idx;
    };
    CHECK(order(a, b) == order(pa, pb));
}
