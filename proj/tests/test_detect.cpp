#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <functional>

#include "detsift/detect.hpp"
#include "detsift/scalespace.hpp"
#include "support/oracles.hpp"
#include "support/synth.hpp"

using namespace detsift;

namespace {

// Scale space whose one interesting DoG level is overwritten by hand.
ScaleSpace handcrafted_space(int size, const std::function<float(int lvl, int x, int y)>& f) {
    ScaleSpace ss;
    ss.intervals = 3;
    ss.sigma0 = 1.6f;
    ss.upsampled = false;
    ss.octaves.resize(1);
    auto& oct = ss.octaves[0];
    for (int i = 0; i < ss.intervals + 3; ++i) oct.gauss.emplace_back(size, size, 0.0f);
    for (int i = 0; i < ss.intervals + 2; ++i) {
        GrayImage d(size, size, 0.0f);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) d.at(x, y) = f(i, x, y);
        oct.dog.push_back(std::move(d));
    }
    return ss;
}

}  // namespace

TEST_CASE("center voxel above all 26 neighbours is a maximum") {
    SiftConfig cfg;
    const ScaleSpace ss = handcrafted_space(9, [](int lvl, int x, int y) {
        return (lvl == 1 && x == 4 && y == 4) ? 1.0f : 0.0f;
    });
    const auto extrema = find_extrema(ss, cfg);
    REQUIRE(extrema.size() == 1);
    CHECK(extrema[0].col == 4);
    CHECK(extrema[0].row == 4);
    CHECK(extrema[0].interval == 1);
    CHECK(extrema[0].is_max);
}

TEST_CASE("constant DoG block has no extrema (strict comparison)") {
    SiftConfig cfg;
    const ScaleSpace ss = handcrafted_space(9, [](int, int, int) { return 0.5f; });
    CHECK(find_extrema(ss, cfg).empty());
}

TEST_CASE("contrast pre-gate suppresses weak voxels") {
    SiftConfig cfg;  // gate = 0.5 * 0.04 / 3 = 0.00667
    const ScaleSpace ss = handcrafted_space(9, [](int lvl, int x, int y) {
        return (lvl == 1 && x == 4 && y == 4) ? 0.005f : 0.0f;
    });
    CHECK(find_extrema(ss, cfg).empty());
}

TEST_CASE("refinement solves a synthetic quadratic to its true offset") {
    // D(v) = 1 - ||v - v*||^2 around the center voxel, v* = (0.3, 0.2, 0.1)
    // in (x, y, s). The quadratic's stationary point must be recovered.
    SiftConfig cfg;
    cfg.contrast_threshold = 0.04f;
    const double tx = 0.3, ty = 0.2, ts = 0.1;
    const ScaleSpace ss = handcrafted_space(9, [&](int lvl, int x, int y) {
        const double dx = x - (4.0 + tx);
        const double dy = y - (4.0 + ty);
        const double dsc = lvl - (1.0 + ts);
        return static_cast<float>(1.0 - (dx * dx + dy * dy + dsc * dsc));
    });
    RawExtremum e{0, 1, 4, 4, true};
    const auto kp = refine_extremum(ss, e, cfg);
    REQUIRE(kp.has_value());
    CHECK(kp->x == doctest::Approx(4.0 + tx).epsilon(1e-5));
    CHECK(kp->y == doctest::Approx(4.0 + ty).epsilon(1e-5));
    // sigma = sigma0 * 2^((i + ds)/s) with i = 1
    CHECK(kp->sigma ==
          doctest::Approx(1.6 * std::pow(2.0, (1.0 + ts) / 3.0)).epsilon(1e-4));
    CHECK(kp->response == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("edge test accepts isotropic and rejects elongated curvature") {
    // tr^2/det vs (r+1)^2/r = 12.1 at r = 10.
    const double r = 10.0;
    const double gate = (r + 1.0) * (r + 1.0) / r;
    {
        const double l1 = 2.0, l2 = 2.0;  // equal eigenvalues
        CHECK((l1 + l2) * (l1 + l2) / (l1 * l2) < gate);
    }
    {
        const double l1 = 20.0, l2 = 1.0;  // ratio 20
        const double ratio = (l1 + l2) * (l1 + l2) / (l1 * l2);
        CHECK(ratio == doctest::Approx(22.05));
        CHECK(ratio >= gate);
    }
}

TEST_CASE("gaussian blob yields exactly one keypoint near its center") {
    SiftConfig cfg;
    GrayImage img(128, 128, 0.2f);
    synth::add_blob(img, 64.0, 64.0, 4.0, 0.6);
    const ScaleSpace ss = build_scale_space(img, cfg);
    const auto keypoints = detect_keypoints(ss, cfg);
    REQUIRE(keypoints.size() == 1);
    CHECK(std::fabs(keypoints[0].x - 64.0) < 1.0);
    CHECK(std::fabs(keypoints[0].y - 64.0) < 1.0);

    // Brute-force parity on the same scale space.
    const auto oracle = oracles::brute_force_detect(ss, cfg);
    REQUIRE(oracle.size() == 1);
    CHECK(std::fabs(oracle[0].x - keypoints[0].x) < 1e-4);
    CHECK(std::fabs(oracle[0].y - keypoints[0].y) < 1e-4);
    CHECK(std::fabs(oracle[0].sigma - keypoints[0].sigma) < 1e-4);
}

TEST_CASE("detector matches the brute-force oracle on random images") {
    SiftConfig cfg;
    for (uint64_t seed : {11u, 22u, 33u}) {
        const GrayImage img = synth::blob_field(64, 64, seed, 10);
        const ScaleSpace ss = build_scale_space(img, cfg);
        const auto ours = detect_keypoints(ss, cfg);
        const auto oracle = oracles::brute_force_detect(ss, cfg);
        REQUIRE(ours.size() == oracle.size());
        for (size_t i = 0; i < ours.size(); ++i) {
            CHECK(std::fabs(ours[i].x - oracle[i].x) < 1e-4);
            CHECK(std::fabs(ours[i].y - oracle[i].y) < 1e-4);
            CHECK(std::fabs(ours[i].sigma - oracle[i].sigma) < 1e-4);
            CHECK(ours[i].octave == oracle[i].octave);
            CHECK(ours[i].interval == oracle[i].interval);
        }
    }
}

TEST_CASE("detection is deterministic across worker counts") {
    SiftConfig cfg;
    const GrayImage img = synth::blob_field(96, 96, 5, 18);
    const ScaleSpace ss = build_scale_space(img, cfg);
    const auto base = detect_keypoints(ss, cfg, 1);
    for (int w : {2, 3, 8}) {
        const auto kps = detect_keypoints(ss, cfg, w);
        REQUIRE(kps.size() == base.size());
        for (size_t i = 0; i < kps.size(); ++i) {
            CHECK(kps[i].x == base[i].x);
            CHECK(kps[i].y == base[i].y);
            CHECK(kps[i].sigma == base[i].sigma);
        }
    }
}

TEST_CASE("emitted keypoints satisfy the stated gates") {
    SiftConfig cfg;
    const GrayImage img = synth::blob_field(80, 80, 12, 14);
    const ScaleSpace ss = build_scale_space(img, cfg);
    for (const auto& kp : detect_keypoints(ss, cfg)) {
        CHECK(kp.response >= cfg.contrast_threshold / cfg.intervals_per_octave);
        CHECK(kp.sigma > 0.0f);
        CHECK(kp.x >= 0.0f);
        CHECK(kp.y >= 0.0f);
        CHECK(kp.x < 80.0f);
        CHECK(kp.y < 80.0f);
    }
}
