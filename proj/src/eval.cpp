#include "detsift/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "detsift/detsum.hpp"
#include "detsift/io.hpp"

namespace fs = std::filesystem;

namespace detsift {

Fraction mma(const MatchSet& matches, std::span<const Keypoint> kp_a,
             std::span<const Keypoint> kp_b, const Homography& h_gt, double threshold) {
    if (!(threshold > 0.0)) throw std::invalid_argument("mma: threshold must be > 0");
    if (matches.pairs.empty()) return {0.0, false};
    size_t good = 0;
    for (const auto& m : matches.pairs) {
        const Keypoint& a = kp_a[m.a];
        const Keypoint& b = kp_b[m.b];
        double px, py;
        try {
            h_gt.apply(a.x, a.y, px, py);
        } catch (const std::exception&) {
            continue;  // projected to infinity: counted as a miss
        }
        if (std::hypot(px - b.x, py - b.y) <= threshold) ++good;
    }
    return {double(good) / matches.pairs.size(), true};
}

Fraction repeatability(std::span<const Keypoint> kp_a, std::span<const Keypoint> kp_b,
                       const Homography& h_gt, double threshold, int width_b,
                       int height_b) {
    if (!(threshold > 0.0)) throw std::invalid_argument("repeatability: threshold must be > 0");
    struct Projected {
        double x, y;
        int idx;
    };
    std::vector<Projected> proj;
    for (size_t i = 0; i < kp_a.size(); ++i) {
        double px, py;
        try {
            h_gt.apply(kp_a[i].x, kp_a[i].y, px, py);
        } catch (const std::exception&) {
            continue;
        }
        if (px >= 0.0 && px < width_b && py >= 0.0 && py < height_b)
            proj.push_back({px, py, static_cast<int>(i)});
    }
    const size_t denom = std::min(proj.size(), kp_b.size());
    if (denom == 0) return {0.0, false};

    struct Cand {
        double dist;
        int pi, bi;
    };
    std::vector<Cand> cands;
    for (size_t p = 0; p < proj.size(); ++p) {
        for (size_t j = 0; j < kp_b.size(); ++j) {
            const double d = std::hypot(proj[p].x - kp_b[j].x, proj[p].y - kp_b[j].y);
            if (d <= threshold) cands.push_back({d, static_cast<int>(p), static_cast<int>(j)});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.pi != b.pi) return a.pi < b.pi;
        return a.bi < b.bi;
    });
    std::vector<uint8_t> used_p(proj.size(), 0), used_b(kp_b.size(), 0);
    size_t repeated = 0;
    for (const auto& c : cands) {
        if (used_p[c.pi] || used_b[c.bi]) continue;
        used_p[c.pi] = 1;
        used_b[c.bi] = 1;
        ++repeated;
    }
    return {double(repeated) / denom, true};
}

namespace {

double mean_tree(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    return detsum::tree_sum(std::span<const double>(values)) / double(values.size());
}

std::string find_image(const fs::path& seq, int index) {
    const fs::path ppm = seq / (std::to_string(index) + ".ppm");
    if (fs::exists(ppm)) return ppm.string();
    const fs::path pgm = seq / (std::to_string(index) + ".pgm");
    if (fs::exists(pgm)) return pgm.string();
    return {};
}

}  // namespace

HpatchesReport run_hpatches(const std::string& dir, const HpatchesOptions& options) {
    HpatchesReport report;
    report.options = options;

    std::vector<fs::path> sequences;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory()) sequences.push_back(entry.path());
    std::sort(sequences.begin(), sequences.end());

    for (const auto& seq : sequences) {
        const std::string name = seq.filename().string();
        GrayImage ref;
        FeatureSet feats_ref;
        try {
            const std::string p1 = find_image(seq, 1);
            if (p1.empty()) throw std::runtime_error("missing image 1");
            ref = load_image(p1);
            feats_ref = extract(ref, options.cfg, options.workers);
        } catch (const std::exception& e) {
            report.failures.push_back(name + ": " + e.what());
            continue;
        }

        for (int k = 2; k <= 6; ++k) {
            PairResult pr;
            pr.sequence = name;
            pr.k = k;
            try {
                const std::string pk = find_image(seq, k);
                if (pk.empty()) throw std::runtime_error("missing image " + std::to_string(k));
                const fs::path hpath = seq / ("H_1_" + std::to_string(k));
                if (!fs::exists(hpath))
                    throw std::runtime_error("missing H_1_" + std::to_string(k));
                const GrayImage target = load_image(pk);
                const Homography h_gt = read_homography(hpath.string());
                const FeatureSet feats_k = extract(target, options.cfg, options.workers);

                const MatchSet matches =
                    ratio_match(feats_ref, feats_k, options.ratio, options.workers);
                pr.keypoints_a = static_cast<int>(feats_ref.size());
                pr.keypoints_b = static_cast<int>(feats_k.size());
                pr.mutual_matches = static_cast<int64_t>(matches.pairs.size());
                for (double t : options.thresholds)
                    pr.mma_at.push_back(
                        mma(matches, feats_ref.keypoints, feats_k.keypoints, h_gt, t).value);
                pr.repeatability3 = repeatability(feats_ref.keypoints, feats_k.keypoints,
                                                  h_gt, 3.0, target.width, target.height);

                if (matches.pairs.size() >= 4) {
                    std::vector<Correspondence> corr;
                    corr.reserve(matches.pairs.size());
                    for (const auto& m : matches.pairs)
                        corr.push_back({feats_ref.keypoints[m.a].x, feats_ref.keypoints[m.a].y,
                                        feats_k.keypoints[m.b].x, feats_k.keypoints[m.b].y});
                    const MagsacResult est =
                        magsac_lite(corr, options.magsac_iterations, options.tau,
                                    options.seed, options.workers);
                    if (est.success) {
                        pr.estimation_ok = true;
                        pr.corner_err = corner_error(est.h, h_gt, ref.width, ref.height);
                    }
                }
            } catch (const std::exception& e) {
                report.failures.push_back(name + "/" + std::to_string(k) + ": " + e.what());
                continue;
            }
            report.pairs.push_back(std::move(pr));
        }
    }

    std::sort(report.pairs.begin(), report.pairs.end(), [](const PairResult& a, const PairResult& b) {
        if (a.sequence != b.sequence) return a.sequence < b.sequence;
        return a.k < b.k;
    });

    report.pair_count = static_cast<int>(report.pairs.size());
    report.mean_mma.assign(options.thresholds.size(), 0.0);
    for (size_t t = 0; t < options.thresholds.size(); ++t) {
        std::vector<double> vals;
        for (const auto& pr : report.pairs) vals.push_back(pr.mma_at[t]);
        report.mean_mma[t] = mean_tree(vals);
    }
    {
        std::vector<double> vals;
        for (const auto& pr : report.pairs)
            if (pr.repeatability3.defined) vals.push_back(pr.repeatability3.value);
        report.mean_repeatability = mean_tree(vals);
    }
    {
        // Failed estimations are reported separately, never folded into the mean.
        std::vector<double> vals;
        for (const auto& pr : report.pairs) {
            if (pr.estimation_ok) vals.push_back(pr.corner_err);
            else ++report.estimation_failures;
        }
        report.mean_corner_error = mean_tree(vals);
    }
    return report;
}

void write_report_json(const HpatchesReport& report, const std::string& path) {
    nlohmann::ordered_json j;
    const SiftConfig& c = report.options.cfg;
    j["config"] = {{"sigma0", c.sigma0},
                   {"intervals_per_octave", c.intervals_per_octave},
                   {"assumed_input_blur", c.assumed_input_blur},
                   {"contrast_threshold", c.contrast_threshold},
                   {"edge_ratio", c.edge_ratio},
                   {"max_refine_iters", c.max_refine_iters},
                   {"upsample_pixel_limit", c.upsample_pixel_limit},
                   {"dsp_scales", c.dsp_scales},
                   {"descriptor_clip", c.descriptor_clip},
                   {"orientation_bins", c.orientation_bins},
                   {"orientation_peak_ratio", c.orientation_peak_ratio},
                   {"num_octaves", c.num_octaves},
                   {"ratio", report.options.ratio},
                   {"magsac_iterations", report.options.magsac_iterations},
                   {"tau", report.options.tau},
                   {"seed", report.options.seed},
                   {"repeatability_protocol",
                    "greedy nearest assignment, denominator min(projected-in-bounds A, B)"}};
    nlohmann::ordered_json mma_obj;
    for (size_t t = 0; t < report.options.thresholds.size(); ++t)
        mma_obj[std::to_string(report.options.thresholds[t])] = report.mean_mma[t];
    j["per_threshold_mma"] = mma_obj;
    j["repeatability"] = report.mean_repeatability;
    j["mean_corner_error"] = report.mean_corner_error;
    j["estimation_failures"] = report.estimation_failures;
    j["pair_count"] = report.pair_count;
    j["failures"] = report.failures;

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_report_csv(const HpatchesReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "sequence,k,keypoints_a,keypoints_b,mutual_matches";
    for (double t : report.options.thresholds) out << ",mma@" << t;
    out << ",repeatability@3,estimation_ok,corner_error\n";
    out.precision(17);
    for (const auto& pr : report.pairs) {
        out << pr.sequence << "," << pr.k << "," << pr.keypoints_a << "," << pr.keypoints_b
            << "," << pr.mutual_matches;
        for (double v : pr.mma_at) out << "," << v;
        out << "," << (pr.repeatability3.defined ? std::to_string(pr.repeatability3.value)
                                                 : std::string("nan"));
        out << "," << (pr.estimation_ok ? 1 : 0) << ","
            << (pr.estimation_ok ? pr.corner_err : std::nan(""));
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace detsift
