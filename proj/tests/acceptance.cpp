// Acceptance runner: executes every acceptance criterion end to end and
// prints one PASS/FAIL line each.
//
// usage: acceptance <path-to-cli-binary> [<configs-dir>] [--only N[,M...]]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gradsuite.hpp"
#include "loss_examples.hpp"
#include "oracles.hpp"
#include "rankgan/checkpoint.hpp"
#include "rankgan/image_io.hpp"
#include "rankgan/pipeline.hpp"
#include "rankgan/training.hpp"

namespace fs = std::filesystem;
using namespace rankgan;
namespace chrono = std::chrono;

namespace {

struct Timer {
    chrono::steady_clock::time_point start = chrono::steady_clock::now();
    double seconds() const {
        return chrono::duration<double>(chrono::steady_clock::now() - start).count();
    }
};

std::string g_cli_path;
std::string g_configs_dir = "configs";

Config reference_config(const std::string& name) {
    return parse_config_file(g_configs_dir + "/" + name);
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

// ---- criterion 1: gradient correctness ----

bool criterion_gradients(std::string& detail) {
    Timer timer;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        worst = std::max(worst, gradsuite::layer_kinds_max_error(seed));
    double composed = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed)
        composed = std::max(composed, gradsuite::composed_map_max_error(seed));
    const double secs = timer.seconds();
    detail = "layer kinds max rel " + fmt("%.2e", worst) + ", composed map " +
             fmt("%.2e", composed) + ", " + fmt("%.1f", secs) + "s";
    return worst <= 1e-3 && composed <= 1e-3 && secs < 60.0;
}

// ---- criterion 2: loss identities ----

bool criterion_loss_identities(std::string& detail) {
    Timer timer;
    auto closed = loss_examples::run_closed_form_cases();
    auto scale = loss_examples::run_scale_invariance(100);
    const double secs = timer.seconds();
    detail = std::to_string(closed.failures.size() + scale.failures.size()) +
             " failing identities, " + fmt("%.2f", secs) + "s";
    for (const auto& f : closed.failures) detail += "; " + f;
    for (const auto& f : scale.failures) detail += "; " + f;
    return closed.failures.empty() && scale.failures.empty() && secs < 10.0;
}

// ---- criterion 3: oracle equivalence ----

bool criterion_oracles(std::string& detail) {
    Timer timer;
    int failures = 0;

    // conv2d vs the naive six-loop reference
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(Rng::mix(seed, 0x0c1));
        const int cin = 1 + rng.uniform_int(3), cout = 1 + rng.uniform_int(3);
        const int h = 3 + rng.uniform_int(6), w = 3 + rng.uniform_int(6);
        const int kh = 1 + rng.uniform_int(3), kw = 1 + rng.uniform_int(3);
        const int stride = 1 + rng.uniform_int(2), pad = rng.uniform_int(2);
        std::vector<double> iv(static_cast<std::size_t>(cin) * h * w);
        std::vector<double> kv(static_cast<std::size_t>(cout) * cin * kh * kw);
        for (auto& v : iv) v = rng.uniform(-1.0, 1.0);
        for (auto& v : kv) v = rng.uniform(-1.0, 1.0);
        Tensor y = conv2d(Tensor::constant({cin, h, w}, iv),
                          Tensor::constant({cout, cin, kh, kw}, kv), stride, pad);
        auto ref = oracles::naive_conv2d(iv, cin, h, w, kv, cout, kh, kw, stride, pad);
        for (std::size_t i = 0; i < ref.size(); ++i)
            if (std::abs(y[i] - ref[i]) > 1e-10) ++failures;
    }

    // connected components vs union-find
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(Rng::mix(seed, 0x0c2));
        HeatMap map(14, 14);
        std::vector<std::uint8_t> bin(map.scores.size());
        for (std::size_t i = 0; i < bin.size(); ++i) {
            bin[i] = rng.uniform() < 0.4 ? 1 : 0;
            map.scores[i] = bin[i] ? 1.0 : 0.0;
        }
        if (static_cast<int>(connected_components(map, 0.5).size()) !=
            oracles::union_find_components(bin, 14, 14))
            ++failures;
    }

    // AP vs brute-force PR enumeration
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(Rng::mix(seed, 0x0c3));
        std::vector<Box> gts, dets;
        const int n_gt = 1 + rng.uniform_int(4);
        for (int i = 0; i < n_gt; ++i)
            gts.push_back(Box{rng.uniform(0, 20), rng.uniform(0, 20),
                              rng.uniform(2, 10), rng.uniform(2, 10)});
        const int n_det = rng.uniform_int(9);
        for (int i = 0; i < n_det; ++i) {
            Box b = rng.uniform() < 0.5 ? gts[static_cast<std::size_t>(
                                              rng.uniform_int(n_gt))]
                                        : Box{rng.uniform(0, 20), rng.uniform(0, 20),
                                              rng.uniform(2, 10), rng.uniform(2, 10)};
            b.x += rng.uniform(-2.0, 2.0);
            b.score = rng.uniform();
            dets.push_back(b);
        }
        if (std::abs(average_precision(dets, gts) -
                     oracles::brute_force_ap(dets, gts, 0.5)) > 1e-12)
            ++failures;
    }

    // SSIM / RMSE vs naive references
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(Rng::mix(seed, 0x0c4));
        const int h = 8 + rng.uniform_int(10), w = 8 + rng.uniform_int(10);
        std::vector<double> a(static_cast<std::size_t>(h) * w), b(a.size());
        for (auto& v : a) v = rng.uniform();
        for (auto& v : b) v = rng.uniform();
        Tensor ta = Tensor::constant({1, h, w}, a), tb = Tensor::constant({1, h, w}, b);
        if (std::abs(rmse(ta, tb) - oracles::naive_rmse(a, b)) > 1e-12) ++failures;
        if (std::abs(ssim(ta, tb) - oracles::naive_ssim(a, b, 1, h, w)) > 1e-9) ++failures;
    }

    const double secs = timer.seconds();
    detail = std::to_string(failures) + " mismatches over 4x100 instances, " +
             fmt("%.1f", secs) + "s";
    return failures == 0 && secs < 60.0;
}

// ---- criteria 4-8: reference training runs ----

TrainConfig row_config(const Config& base, TrainMode mode, bool rank, bool pixel, bool adv,
                       std::uint64_t seed) {
    TrainConfig cfg = base.train;
    cfg.mode = mode;
    cfg.seed = seed;
    cfg.use_rank = rank;
    cfg.use_img = pixel;
    cfg.use_feat = pixel;
    cfg.use_adv = adv;
    return cfg;
}

bool criterion_table2(std::string& detail) {
    Timer timer;
    Config base = reference_config("supervised_ref.cfg");
    int seeds_ok = 0;
    detail = "";
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        std::map<std::string, double> ssim_by_row;
        const std::vector<std::tuple<std::string, bool, bool, bool>> rows = {
            {"full", true, true, true},
            {"adv+img", false, true, true},
            {"adv+rank", true, false, true},
            {"img+rank", true, true, false}};
        for (const auto& [name, rank, pixel, adv] : rows) {
            TrainConfig cfg = row_config(base, TrainMode::supervised, rank, pixel, adv, seed);
            TrainResult r = train(cfg);
            SynthEvalResult ev = evaluate_synthesis(r.nets, cfg.scene, base.eval.eval_seed,
                                                    base.eval.eval_scenes);
            ssim_by_row[name] = ev.mean_ssim;
            std::fprintf(stderr, "  supervised %-8s seed %llu ssim %.4f\n", name.c_str(),
                         static_cast<unsigned long long>(seed), ev.mean_ssim);
        }
        const double full = ssim_by_row["full"];
        const double worst =
            std::min({ssim_by_row["adv+img"], ssim_by_row["adv+rank"], ssim_by_row["img+rank"]});
        const bool ordered = full >= ssim_by_row["adv+img"] &&
                             full >= ssim_by_row["adv+rank"] &&
                             ssim_by_row["img+rank"] <= worst + 1e-12;
        seeds_ok += ordered ? 1 : 0;
        detail += "seed" + std::to_string(seed) + (ordered ? " ok" : " FAIL") + " [full " +
                  fmt("%.3f", full) + ", adv+img " + fmt("%.3f", ssim_by_row["adv+img"]) +
                  ", adv+rank " + fmt("%.3f", ssim_by_row["adv+rank"]) + ", img+rank " +
                  fmt("%.3f", ssim_by_row["img+rank"]) + "] ";
    }
    const double secs = timer.seconds();
    detail += fmt("%.0f", secs) + "s";
    return seeds_ok >= 2 && secs < 1800.0;
}

// Weak-mode artifacts shared by criteria 5-8.
struct WeakRun {
    EvalResult eval;
    PseudoGT pseudo;
    Networks nets;
    bool firewall_clean = false;
};

WeakRun run_weak_row(const Config& base, bool rank, bool pixel, bool adv,
                     std::uint64_t seed) {
    WeakRun out;
    TrainConfig cfg = row_config(base, TrainMode::weak, rank, pixel, adv, seed);
    reset_privileged_box_reads();
    TrainResult r = train(cfg);
    auto scenes = generate_dataset(cfg.dataset_seed, cfg.scene_for_mode(),
                                   cfg.dataset_scenes);
    out.pseudo = extract_pseudo_gt_dataset(scenes, r.nets, base.discovery);
    Detector det = train_detector(out.pseudo, base.detector, base.discovery.proposals,
                                  cfg.net.categories, cfg.net.patch_size,
                                  cfg.net.in_channels, cfg.seed);
    out.firewall_clean = privileged_box_reads() == 0;  // before any evaluation
    out.eval = evaluate_detector_on(det, cfg.scene, base.eval.eval_seed,
                                    base.eval.eval_scenes, cfg.net.categories,
                                    base.eval.iou_threshold);
    out.nets = r.nets;
    return out;
}

struct WeakResults {
    bool ready = false;
    std::map<std::string, std::map<std::uint64_t, double>> map_by_row;
    bool firewall_clean = true;
    WeakRun full_seed0;
    double seconds = 0.0;
};

WeakResults g_weak;

void ensure_weak_runs() {
    if (g_weak.ready) return;
    Timer timer;
    Config base = reference_config("weak_ref.cfg");
    const std::vector<std::tuple<std::string, bool, bool, bool>> rows = {
        {"full", true, true, true},
        {"adv+feat", false, true, true},
        {"adv+rank", true, false, true},
        {"feat+rank", true, true, false}};
    for (const auto& [name, rank, pixel, adv] : rows) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            WeakRun run = run_weak_row(base, rank, pixel, adv, seed);
            g_weak.map_by_row[name][seed] = run.eval.map;
            g_weak.firewall_clean = g_weak.firewall_clean && run.firewall_clean;
            std::fprintf(stderr, "  weak %-9s seed %llu mAP %.4f\n", name.c_str(),
                         static_cast<unsigned long long>(seed),
                         g_weak.map_by_row[name][seed]);
            if (name == "full" && seed == 0) g_weak.full_seed0 = std::move(run);
        }
    }
    g_weak.seconds = timer.seconds();
    g_weak.ready = true;
}

bool criterion_table3(std::string& detail) {
    ensure_weak_runs();
    int seeds_ok = 0;
    detail = "";
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const double full = g_weak.map_by_row["full"][seed];
        const double advrank = g_weak.map_by_row["adv+rank"][seed];
        const double advfeat = g_weak.map_by_row["adv+feat"][seed];
        const double featrank = g_weak.map_by_row["feat+rank"][seed];
        const bool ordered = full >= advrank && advrank >= advfeat &&
                             featrank <= std::min({full, advrank, advfeat}) + 1e-12;
        seeds_ok += ordered ? 1 : 0;
        detail += "seed" + std::to_string(seed) + (ordered ? " ok" : " FAIL") + " [full " +
                  fmt("%.3f", full) + " >= adv+rank " + fmt("%.3f", advrank) +
                  " >= adv+feat " + fmt("%.3f", advfeat) + ", feat+rank " +
                  fmt("%.3f", featrank) + " last] ";
    }
    detail += fmt("%.0f", g_weak.seconds) + "s";
    return seeds_ok >= 2 && g_weak.seconds < 2700.0;
}

bool criterion_firewall(std::string& detail) {
    ensure_weak_runs();
    detail = g_weak.firewall_clean ? "privileged-box reads = 0 across weak training, "
                                     "discovery and detector training"
                                   : "privileged boxes were read during a weak phase";
    return g_weak.firewall_clean;
}

bool criterion_augmentation(std::string& detail) {
    ensure_weak_runs();
    Config base = reference_config("weak_ref.cfg");
    const WeakRun& run = g_weak.full_seed0;
    reset_privileged_box_reads();
    PseudoGT augmented = augment_with_synth(run.pseudo, run.nets, base.discovery);
    Detector det_plain = train_detector(run.pseudo, base.detector, base.discovery.proposals,
                                        base.train.net.categories, base.train.net.patch_size,
                                        base.train.net.in_channels, 0);
    Detector det_aug = train_detector(augmented, base.detector, base.discovery.proposals,
                                      base.train.net.categories, base.train.net.patch_size,
                                      base.train.net.in_channels, 0);
    const bool clean = privileged_box_reads() == 0;
    EvalResult plain = evaluate_detector_on(det_plain, base.train.scene, base.eval.eval_seed,
                                            base.eval.eval_scenes, base.train.net.categories,
                                            base.eval.iou_threshold);
    EvalResult aug = evaluate_detector_on(det_aug, base.train.scene, base.eval.eval_seed,
                                          base.eval.eval_scenes, base.train.net.categories,
                                          base.eval.iou_threshold);
    detail = "augmented mAP " + fmt("%.4f", aug.map) + " vs plain " + fmt("%.4f", plain.map) +
             " (bound: plain - 0.005), firewall " + (clean ? "clean" : "VIOLATED");
    return clean && aug.map >= plain.map - 0.005;
}

bool criterion_localization(std::string& detail) {
    ensure_weak_runs();
    Config base = reference_config("weak_ref.cfg");
    SceneSpec spec = base.train.scene;
    LocalizationEval loc = evaluate_localization(g_weak.full_seed0.nets, base.discovery, spec,
                                                 base.eval.corloc_seed,
                                                 base.eval.corloc_scenes);
    detail = "CorLoc " + fmt("%.3f", loc.corloc) + " (>= 0.6), IoU>0.5 rate " +
             fmt("%.3f", loc.iou_rate) + " (>= 0.6), random baseline " +
             fmt("%.3f", loc.random_corloc) + " (x3 margin)";
    return loc.corloc >= 0.6 && loc.iou_rate >= 0.6 &&
           loc.corloc >= 3.0 * loc.random_corloc;
}

// ---- criterion 9: CLI determinism ----

int run_cli(const std::string& args) {
    const std::string cmd = g_cli_path + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
}

bool files_equal(const fs::path& a, const fs::path& b) {
    if (!fs::exists(a) || !fs::exists(b)) return false;
    return read_file(a.string()) == read_file(b.string());
}

bool criterion_cli_determinism(std::string& detail) {
    Timer timer;
    const fs::path root = fs::temp_directory_path() / "rankgan_acceptance_c9";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cfg_path = (root / "ref.cfg").string();
    Config cfg = reference_config("weak_ref.cfg");
    cfg.train.steps = 20;
    cfg.train.pretrain_steps = 60;
    cfg.train.gen_pretrain_steps = 40;
    cfg.train.dataset_scenes = 12;
    cfg.eval.eval_scenes = 6;
    atomic_write_file(cfg_path, serialize_config(cfg));

    for (const char* run : {"a", "b"}) {
        const std::string out = (root / run).string();
        if (run_cli("--config " + cfg_path + " --out " + out + " gen-data") != 0 ||
            run_cli("--config " + cfg_path + " --out " + out + " train") != 0 ||
            run_cli("--config " + cfg_path + " --out " + out + " discover --ckpt " + out +
                    "/final.ckpt") != 0 ||
            run_cli("--config " + cfg_path + " --out " + out + " train-detector --ckpt " +
                    out + "/final.ckpt") != 0 ||
            run_cli("--config " + cfg_path + " --out " + out + " eval") != 0) {
            detail = "a CLI stage failed";
            return false;
        }
    }

    const std::vector<std::string> artifacts = {
        "final.ckpt", "train.log", "detector.ckpt", "results.txt", "results.kv",
        "scenes_train/scene_0000.pgm", "pseudo/scene_0000.txt", "pseudo/scene_0005.txt"};
    int mismatches = 0;
    for (const auto& rel : artifacts)
        if (!files_equal(root / "a" / rel, root / "b" / rel)) ++mismatches;
    const double secs = timer.seconds();
    detail = std::to_string(mismatches) + " artifact mismatches across reruns, " +
             fmt("%.0f", secs) + "s";
    fs::remove_all(root);
    return mismatches == 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli_path = argv[1];
    std::set<int> only;
    for (int i = 2; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
            const std::string list = argv[++i];
            std::size_t pos = 0;
            while (pos < list.size()) {
                only.insert(std::atoi(list.c_str() + pos));
                pos = list.find(',', pos);
                if (pos == std::string::npos) break;
                ++pos;
            }
        } else {
            g_configs_dir = argv[i];
        }
    }

    struct Criterion {
        int id;
        const char* name;
        std::function<bool(std::string&)> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "gradient correctness vs central differences", criterion_gradients},
        {2, "loss identity suite", criterion_loss_identities},
        {3, "oracle equivalence (conv, components, AP, SSIM/RMSE)", criterion_oracles},
        {4, "supervised loss-ablation SSIM ordering", criterion_table2},
        {5, "weak-mode loss-ablation mAP ordering", criterion_table3},
        {6, "weak-supervision firewall", criterion_firewall},
        {7, "synthetic-sample augmentation non-regression", criterion_augmentation},
        {8, "weak pipeline localization sanity", criterion_localization},
        {9, "CLI rerun determinism", criterion_cli_determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %d: %s — %s\n", ok ? "PASS" : "FAIL", c.id, c.name,
                    detail.c_str());
        std::fflush(stdout);
        failures += ok ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
