// detsift command-line tool: extraction, matching, homography estimation,
// HPatches evaluation, determinism verification, and benchmarking.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "detsift/core.hpp"
#include "detsift/detsum.hpp"
#include "detsift/eval.hpp"
#include "detsift/geom.hpp"
#include "detsift/io.hpp"
#include "detsift/match.hpp"
#include "detsift/parallel.hpp"
#include "detsift/scalespace.hpp"

using namespace detsift;

namespace {

struct ConfigArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.config_path, "flat key=value config file");
    cmd->add_option("--set", args.overrides,
                    "config override key=value (repeatable; applied after --config)");
}

SiftConfig resolve_config(const ConfigArgs& args) {
    SiftConfig cfg;
    if (!args.config_path.empty()) cfg = load_config(args.config_path);
    for (const auto& kv : args.overrides) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got: " + kv);
        apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

std::vector<int> parse_worker_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoi(item));
    }
    if (out.empty()) throw std::invalid_argument("empty worker list");
    return out;
}

int default_workers() {
    if (const char* env = std::getenv("DETSIFT_WORKERS")) {
        try {
            return std::max(0, std::stoi(env));
        } catch (...) {
        }
    }
    return 0;  // auto
}

int cmd_extract(const std::string& input, const std::string& output,
                const ConfigArgs& cargs, int workers) {
    const SiftConfig cfg = resolve_config(cargs);
    const GrayImage img = load_image(input);
    const FeatureSet feats = extract(img, cfg, workers);
    write_features(feats, output);
    std::cout << "keypoints=" << feats.size() << " dim=" << feats.dim
              << " upsampled=" << (will_upsample(img, cfg) ? 1 : 0)
              << " sha256=" << detsum::hash_features(feats) << "\n";
    return 0;
}

int cmd_match(const std::string& feats_a, const std::string& feats_b,
              const std::string& output, float ratio, int pca_dim, int workers) {
    FeatureSet a = read_features(feats_a);
    FeatureSet b = read_features(feats_b);
    if (pca_dim > 0) {
        auto [pa, pb, proj] = pca_compress(a, b, pca_dim);
        a = std::move(pa);
        b = std::move(pb);
    }
    if (a.size() < 2 || b.size() < 2)
        std::cerr << "warning: fewer than 2 descriptors on one side; "
                     "ratio test undefined, emitting empty match set\n";
    const MatchSet matches = ratio_match(a, b, ratio, workers);
    write_matches(matches, output);
    std::cout << "putative_a=" << matches.putative_a << " putative_b=" << matches.putative_b
              << " mutual=" << matches.pairs.size() << "\n";
    return 0;
}

int cmd_homography(const std::string& matches_path, const std::string& feats_a,
                   const std::string& feats_b, const std::string& output, int iterations,
                   double tau, uint64_t seed, int workers) {
    const MatchSet matches = read_matches(matches_path);
    const FeatureSet a = read_features(feats_a);
    const FeatureSet b = read_features(feats_b);
    std::vector<Correspondence> corr;
    corr.reserve(matches.pairs.size());
    for (const auto& m : matches.pairs) {
        if (m.a < 0 || size_t(m.a) >= a.size() || m.b < 0 || size_t(m.b) >= b.size())
            throw std::runtime_error("match index out of range of the feature files");
        corr.push_back({a.keypoints[m.a].x, a.keypoints[m.a].y, b.keypoints[m.b].x,
                        b.keypoints[m.b].y});
    }
    if (corr.size() < 4) {
        std::cerr << "error: need at least 4 correspondences, have " << corr.size() << "\n";
        return 1;
    }
    const MagsacResult result = magsac_lite(corr, iterations, tau, seed, workers);
    if (!result.success) {
        std::cerr << "error: estimation failed (no hypothesis with enough soft-inliers)\n";
        return 1;
    }
    write_homography(result.h, output);
    size_t inliers = 0;
    for (uint8_t v : result.inlier_mask) inliers += v;
    std::cout << "score=" << result.score << " inliers=" << inliers << "/"
              << corr.size() << " best_iteration=" << result.best_iteration << "\n";
    return 0;
}

int cmd_eval_hpatches(const std::string& dir, const std::string& thresholds_arg,
                      const std::string& report_path, const std::string& csv_path,
                      const ConfigArgs& cargs, float ratio, int iterations, double tau,
                      uint64_t seed, int workers) {
    HpatchesOptions options;
    options.cfg = resolve_config(cargs);
    options.thresholds.clear();
    std::stringstream ss(thresholds_arg);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) options.thresholds.push_back(std::stod(item));
    if (options.thresholds.empty()) throw std::invalid_argument("empty threshold list");
    options.ratio = ratio;
    options.magsac_iterations = iterations;
    options.tau = tau;
    options.seed = seed;
    options.workers = workers;

    const HpatchesReport report = run_hpatches(dir, options);
    if (!report_path.empty()) write_report_json(report, report_path);
    if (!csv_path.empty()) write_report_csv(report, csv_path);

    std::cout << "pairs=" << report.pair_count;
    for (size_t t = 0; t < options.thresholds.size(); ++t)
        std::cout << " mma@" << options.thresholds[t] << "=" << report.mean_mma[t];
    std::cout << " rep@3=" << report.mean_repeatability
              << " corner_err=" << report.mean_corner_error
              << " est_failures=" << report.estimation_failures << "\n";
    for (const auto& f : report.failures) std::cerr << "sequence failure: " << f << "\n";
    return report.failures.empty() ? 0 : 2;
}

int cmd_verify_determinism(const std::string& input, int runs,
                           const std::string& workers_arg, const ConfigArgs& cargs) {
    const SiftConfig cfg = resolve_config(cargs);
    const std::vector<int> worker_counts = parse_worker_list(workers_arg);
    const GrayImage img = load_image(input);
    if (detsum::nondeterministic_mode())
        std::cerr << "warning: DETSIFT_NONDET=1, reductions are deliberately broken\n";

    std::map<std::string, std::vector<std::pair<int, int>>> digests;  // digest -> (run, workers)
    int total = 0;
    for (int run = 0; run < runs; ++run) {
        for (int w : worker_counts) {
            const FeatureSet feats = extract(img, cfg, w);
            const std::string digest = detsum::hash_features(feats);
            digests[digest].push_back({run, w});
            std::cout << "run=" << run << " workers=" << w << " sha256=" << digest << "\n";
            ++total;
        }
    }
    if (digests.size() == 1) {
        std::cout << "1 unique digest over " << total << " runs\n";
        return 0;
    }
    std::cout << digests.size() << " distinct digests over " << total << " runs\n";
    for (const auto& [digest, occurrences] : digests) {
        std::cout << "digest " << digest << " from:";
        for (const auto& [run, w] : occurrences) std::cout << " (run=" << run << ",workers=" << w << ")";
        std::cout << "\n";
    }
    return 3;
}

int cmd_bench(const std::string& input, int repeat, const ConfigArgs& cargs, int workers) {
    const SiftConfig cfg = resolve_config(cargs);
    using clock = std::chrono::steady_clock;
    auto ms_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };

    std::map<std::string, std::vector<double>> times;
    size_t keypoints = 0;
    for (int r = 0; r < repeat; ++r) {
        auto t0 = clock::now();
        const GrayImage img = load_image(input);
        times["load"].push_back(ms_since(t0));

        t0 = clock::now();
        const ScaleSpace ss = build_scale_space(img, cfg, workers);
        times["scale_space"].push_back(ms_since(t0));

        t0 = clock::now();
        const FeatureSet feats = extract(img, cfg, workers);
        times["extract_total"].push_back(ms_since(t0));

        t0 = clock::now();
        detsum::hash_features(feats);
        times["hash"].push_back(ms_since(t0));
        keypoints = feats.size();
    }

    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };

    nlohmann::ordered_json j;
    j["input"] = input;
    j["repeat"] = repeat;
    j["workers"] = workers;
    j["keypoints"] = keypoints;
    std::cout << "stage            median_ms\n";
    for (const auto& [stage, vals] : times) {
        const double m = median(vals);
        std::cout << stage;
        for (size_t i = stage.size(); i < 17; ++i) std::cout << ' ';
        std::cout << m << "\n";
        j["median_ms"][stage] = m;
    }
    std::cout << j.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic DSP-SIFT feature toolkit"};
    app.require_subcommand(1);

    // extract
    auto* extract_cmd = app.add_subcommand("extract", "extract features from an image");
    std::string ex_input, ex_output;
    ConfigArgs ex_cfg;
    int ex_workers = default_workers();
    extract_cmd->add_option("--input", ex_input, "PGM/PPM image")->required();
    extract_cmd->add_option("--output", ex_output, "feature file to write")->required();
    add_config_options(extract_cmd, ex_cfg);
    extract_cmd->add_option("--workers", ex_workers, "worker threads (0 = auto)")
        ->envname("DETSIFT_WORKERS");

    // match
    auto* match_cmd = app.add_subcommand("match", "symmetric-ratio match two feature files");
    std::string m_a, m_b, m_out;
    float m_ratio = 0.8f;
    int m_pca = 0;
    int m_workers = default_workers();
    match_cmd->add_option("--feats-a", m_a)->required();
    match_cmd->add_option("--feats-b", m_b)->required();
    match_cmd->add_option("--output", m_out)->required();
    match_cmd->add_option("--ratio", m_ratio, "ratio-test threshold");
    match_cmd->add_option("--pca", m_pca, "joint-PCA output dimension (0 = off)");
    match_cmd->add_option("--workers", m_workers)->envname("DETSIFT_WORKERS");

    // homography
    auto* hom_cmd = app.add_subcommand("homography", "robust homography from matches");
    std::string h_matches, h_a, h_b, h_out;
    int h_iters = 1500;
    double h_tau = 3.0;
    uint64_t h_seed = 1;
    int h_workers = default_workers();
    hom_cmd->add_option("--matches", h_matches)->required();
    hom_cmd->add_option("--feats-a", h_a, "feature file resolving index_a")->required();
    hom_cmd->add_option("--feats-b", h_b, "feature file resolving index_b")->required();
    hom_cmd->add_option("--output", h_out)->required();
    hom_cmd->add_option("--iterations", h_iters);
    hom_cmd->add_option("--tau", h_tau, "soft-inlier threshold, px");
    hom_cmd->add_option("--seed", h_seed);
    hom_cmd->add_option("--workers", h_workers)->envname("DETSIFT_WORKERS");

    // eval-hpatches
    auto* eval_cmd = app.add_subcommand("eval-hpatches", "run the HPatches pair protocol");
    std::string e_dir, e_thresholds = "1,2,3,4,5,6,7,8,9,10", e_report, e_csv;
    ConfigArgs e_cfg;
    float e_ratio = 0.8f;
    int e_iters = 1500;
    double e_tau = 3.0;
    uint64_t e_seed = 1;
    int e_workers = default_workers();
    eval_cmd->add_option("--dir", e_dir, "HPatches-layout root directory")->required();
    eval_cmd->add_option("--thresholds", e_thresholds, "comma list of px thresholds");
    eval_cmd->add_option("--report", e_report, "JSON report path");
    eval_cmd->add_option("--csv", e_csv, "per-pair CSV path");
    add_config_options(eval_cmd, e_cfg);
    eval_cmd->add_option("--ratio", e_ratio);
    eval_cmd->add_option("--iterations", e_iters);
    eval_cmd->add_option("--tau", e_tau);
    eval_cmd->add_option("--seed", e_seed);
    eval_cmd->add_option("--workers", e_workers)->envname("DETSIFT_WORKERS");

    // verify-determinism
    auto* verify_cmd = app.add_subcommand("verify-determinism",
                                          "hash repeated runs across worker counts");
    std::string v_input, v_workers = "1,2,4,8";
    int v_runs = 10;
    ConfigArgs v_cfg;
    verify_cmd->add_option("--input", v_input)->required();
    verify_cmd->add_option("--runs", v_runs, "repetitions per worker count");
    verify_cmd->add_option("--workers", v_workers, "comma list of worker counts");
    add_config_options(verify_cmd, v_cfg);

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "per-stage timing");
    std::string b_input;
    int b_repeat = 5;
    ConfigArgs b_cfg;
    int b_workers = default_workers();
    bench_cmd->add_option("--input", b_input)->required();
    bench_cmd->add_option("--repeat", b_repeat);
    add_config_options(bench_cmd, b_cfg);
    bench_cmd->add_option("--workers", b_workers)->envname("DETSIFT_WORKERS");

    CLI11_PARSE(app, argc, argv);

    try {
        if (extract_cmd->parsed())
            return cmd_extract(ex_input, ex_output, ex_cfg, ex_workers);
        if (match_cmd->parsed())
            return cmd_match(m_a, m_b, m_out, m_ratio, m_pca, m_workers);
        if (hom_cmd->parsed())
            return cmd_homography(h_matches, h_a, h_b, h_out, h_iters, h_tau, h_seed,
                                  h_workers);
        if (eval_cmd->parsed())
            return cmd_eval_hpatches(e_dir, e_thresholds, e_report, e_csv, e_cfg, e_ratio,
                                     e_iters, e_tau, e_seed, e_workers);
        if (verify_cmd->parsed())
            return cmd_verify_determinism(v_input, v_runs, v_workers, v_cfg);
        if (bench_cmd->parsed())
            return cmd_bench(b_input, b_repeat, b_cfg, b_workers);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
