// Command-line driver: dataset generation, training, synthesis, discovery,
// detector training, evaluation and the loss-ablation grid.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rankgan/checkpoint.hpp"
#include "rankgan/image_io.hpp"
#include "rankgan/imageops.hpp"
#include "rankgan/pipeline.hpp"
#include "rankgan/training.hpp"

namespace fs = std::filesystem;
using namespace rankgan;

namespace {

struct Context {
    Config cfg;
    std::string out_dir;
    bool force = false;
    std::vector<std::string> created;

    std::string path(const std::string& rel) const { return out_dir + "/" + rel; }

    void ensure_out_dir(const std::string& rel = "") {
        fs::create_directories(rel.empty() ? out_dir : path(rel));
    }

    // Refuses to clobber existing artifacts unless --force is given.
    std::string fresh(const std::string& rel) {
        const std::string p = path(rel);
        if (!force && fs::exists(p))
            throw IoError("output '" + p + "' exists; pass --force to overwrite");
        created.push_back(p);
        return p;
    }

    void cleanup_partial() {
        for (const auto& p : created) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }
};

std::string seq_name(const char* stem, int index, const char* ext) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s_%04d%s", stem, index, ext);
    return buf;
}

Checkpoint make_checkpoint(const Config& cfg, const TrainResult& r) {
    Checkpoint ckpt;
    ckpt.step = r.state.step;
    ckpt.mode = cfg.train.mode;
    ckpt.config = cfg;
    ckpt.rng_state = r.state.rng.state();
    ckpt.nets = r.nets;
    ckpt.opt_eg = r.state.opt_eg;
    ckpt.opt_d = r.state.opt_d;
    return ckpt;
}

void cmd_gen_data(Context& ctx, const std::string& split, int count_override) {
    const bool eval_split = split == "eval";
    SceneSpec spec = ctx.cfg.train.scene_for_mode();
    if (eval_split) spec.supervision = Supervision::full;
    const std::uint64_t seed =
        eval_split ? ctx.cfg.eval.eval_seed : ctx.cfg.train.dataset_seed;
    const int count = count_override > 0
                          ? count_override
                          : (eval_split ? ctx.cfg.eval.eval_scenes : ctx.cfg.train.dataset_scenes);
    const std::string dir = "scenes_" + split;
    ctx.ensure_out_dir(dir);
    for (int i = 0; i < count; ++i) {
        Scene scene = generate_scene(Rng::mix(seed, static_cast<std::uint64_t>(i)), spec);
        write_image(ctx.fresh(dir + "/" + seq_name("scene", i, ".pgm")), scene.image());
        if (spec.supervision == Supervision::full) {
            write_annotations(ctx.fresh(dir + "/" + seq_name("scene", i, ".txt")),
                              scene.boxes());
        } else {
            std::string labels;
            for (int c : scene.labels()) labels += std::to_string(c) + "\n";
            atomic_write_file(ctx.fresh(dir + "/" + seq_name("scene", i, ".labels")), labels);
        }
    }
    std::printf("gen-data: wrote %d scenes to %s\n", count, ctx.path(dir).c_str());
}

void cmd_pretrain(Context& ctx) {
    ctx.ensure_out_dir();
    Networks nets = Networks::init(ctx.cfg.train.net, ctx.cfg.train.seed);
    CategoryBank bank(ctx.cfg.train.net.patch_size, ctx.cfg.train.net.in_channels);
    std::string log = "# step loss\n";
    AdamConfig adam = ctx.cfg.train.adam;
    adam.lr = ctx.cfg.train.pretrain_lr;
    pretrain_encoder(nets, bank, ctx.cfg.train.pretrain_steps, ctx.cfg.train.pretrain_batch,
                     Rng::mix(ctx.cfg.train.seed, 0x93e), adam,
                     [&](std::uint64_t step, double loss) {
                         char line[64];
                         std::snprintf(line, sizeof(line), "%llu %.9e\n",
                                       static_cast<unsigned long long>(step), loss);
                         log += line;
                     });
    TrainResult r;
    r.nets = nets;
    init_trainer_state(r.state, nets, ctx.cfg.train);
    save_checkpoint(ctx.fresh("pretrained.ckpt"), make_checkpoint(ctx.cfg, r));
    atomic_write_file(ctx.fresh("pretrain.log"), log);
    std::printf("pretrain-encoder: wrote %s\n", ctx.path("pretrained.ckpt").c_str());
}

void cmd_train(Context& ctx, const std::string& init_path) {
    ctx.ensure_out_dir();
    Networks init_nets;
    const Networks* init = nullptr;
    if (!init_path.empty()) {
        init_nets = load_checkpoint(init_path).nets;
        init = &init_nets;
    }
    std::string log = "# step mode rank adv disc img feat total\n";
    TrainCallbacks cb;
    cb.on_step = [&](std::uint64_t step, const LossReport& report) {
        log += report.log_line(step) + "\n";
    };
    cb.on_checkpoint = [&](std::uint64_t step, const Networks& nets, const TrainerState& st) {
        TrainResult snap;
        snap.nets = nets;
        snap.state = st;
        char name[48];
        std::snprintf(name, sizeof(name), "ckpt_%06llu.ckpt",
                      static_cast<unsigned long long>(step));
        save_checkpoint(ctx.fresh(name), make_checkpoint(ctx.cfg, snap));
    };
    TrainResult r = train(ctx.cfg.train, init, cb);
    save_checkpoint(ctx.fresh("final.ckpt"), make_checkpoint(ctx.cfg, r));
    atomic_write_file(ctx.fresh("train.log"), log);
    std::printf("train: %d steps (%s mode), wrote %s\n", ctx.cfg.train.steps,
                to_string(ctx.cfg.train.mode).c_str(), ctx.path("final.ckpt").c_str());
}

void cmd_synth(Context& ctx, const std::string& ckpt_path, std::uint64_t scene_seed,
               int category) {
    ctx.ensure_out_dir();
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    SceneSpec spec = ckpt.config.train.scene;
    spec.supervision = Supervision::full;  // the true patch requires boxes
    Scene scene = generate_scene(scene_seed, spec);
    const Instance* target = nullptr;
    for (const auto& inst : scene.boxes())
        if (category < 0 || inst.category == category) {
            target = &inst;
            break;
        }
    if (!target)
        throw LookupError("synth: scene " + std::to_string(scene_seed) +
                          " has no instance of category " + std::to_string(category));

    const NetConfig& net = ckpt.nets.cfg;
    HeatMap mask = box_mask_map(target->box, scene.height(), scene.width(), net.heat_res(),
                                net.heat_res());
    Tensor vis = encode_image(ckpt.nets.encoder, scene.image(), false);
    Tensor loc = encode_location(ckpt.nets.locenc, mask, net.heat_res(), false);
    Tensor synth = generate(ckpt.nets.generator, build_latent(vis, loc), false);
    Tensor truth = crop_resize(scene.image(), target->box, net.patch_size, net.patch_size);

    write_image(ctx.fresh("synth.pgm"), synth);
    write_image(ctx.fresh("synth_true.pgm"), truth);
    char metrics[96];
    std::snprintf(metrics, sizeof(metrics), "ssim = %.6f\nrmse = %.6f\ncategory = %d\n",
                  ssim(synth, truth), rmse(synth, truth), target->category);
    atomic_write_file(ctx.fresh("synth_metrics.txt"), metrics);
    std::printf("synth: category %d of scene %llu -> %s\n", target->category,
                static_cast<unsigned long long>(scene_seed), ctx.path("synth.pgm").c_str());
}

void cmd_discover(Context& ctx, const std::string& ckpt_path, int heat_exports) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    SceneSpec spec = ckpt.config.train.scene;
    spec.supervision = Supervision::weak;
    ctx.ensure_out_dir("pseudo");
    if (heat_exports > 0) ctx.ensure_out_dir("heat");
    const int count = ckpt.config.train.dataset_scenes;
    int boxes = 0;
    for (int i = 0; i < count; ++i) {
        Scene scene = generate_scene(
            Rng::mix(ckpt.config.train.dataset_seed, static_cast<std::uint64_t>(i)), spec);
        auto pseudo = extract_pseudo_gt(scene, ckpt.nets, ctx.cfg.discovery);
        boxes += static_cast<int>(pseudo.size());
        write_annotations(ctx.fresh("pseudo/" + seq_name("scene", i, ".txt")), pseudo);
        if (i < heat_exports) {
            for (int cat : scene.labels()) {
                HeatMap cam = class_activation_map(ckpt.nets.encoder, scene.image(), cat);
                const std::string stem = "heat/" + seq_name("cam", i, "") + "_cat" +
                                         std::to_string(cat);
                write_heatmap_text(ctx.fresh(stem + ".txt"), cam);
                write_heatmap_image(ctx.fresh(stem + ".pgm"), cam);
            }
        }
    }
    std::printf("discover: %d pseudo boxes over %d scenes -> %s\n", boxes, count,
                ctx.path("pseudo").c_str());
}

PseudoGT read_pseudo_dataset(const Config& cfg, const std::string& pseudo_dir) {
    SceneSpec spec = cfg.train.scene;
    spec.supervision = Supervision::weak;
    PseudoGT pseudo;
    for (int i = 0; i < cfg.train.dataset_scenes; ++i) {
        Scene scene = generate_scene(
            Rng::mix(cfg.train.dataset_seed, static_cast<std::uint64_t>(i)), spec);
        PseudoScene ps;
        ps.image = scene.image();
        ps.boxes = read_annotations(pseudo_dir + "/" + seq_name("scene", i, ".txt"));
        pseudo.push_back(std::move(ps));
    }
    return pseudo;
}

void cmd_train_detector(Context& ctx, const std::string& pseudo_dir,
                        const std::string& ckpt_path, bool augment) {
    ctx.ensure_out_dir();
    const std::string dir = pseudo_dir.empty() ? ctx.path("pseudo") : pseudo_dir;
    Config cfg = ctx.cfg;
    if (!ckpt_path.empty()) cfg = load_checkpoint(ckpt_path).config;
    PseudoGT pseudo = read_pseudo_dataset(cfg, dir);
    if (augment) {
        if (ckpt_path.empty())
            throw ParameterError("train-detector: --augment requires --ckpt");
        Checkpoint ckpt = load_checkpoint(ckpt_path);
        pseudo = augment_with_synth(pseudo, ckpt.nets, ctx.cfg.discovery);
    }
    Detector det = train_detector(pseudo, ctx.cfg.detector, ctx.cfg.discovery.proposals,
                                  cfg.train.net.categories, cfg.train.net.patch_size,
                                  cfg.train.net.in_channels, cfg.train.seed);
    save_detector(ctx.fresh("detector.ckpt"), det);
    std::printf("train-detector: %s -> %s\n", augment ? "augmented pseudo set" : "pseudo set",
                ctx.path("detector.ckpt").c_str());
}

void cmd_eval(Context& ctx, const std::string& det_path) {
    ctx.ensure_out_dir();
    Detector det = load_detector(det_path.empty() ? ctx.path("detector.ckpt") : det_path);
    EvalResult r = evaluate_detector_on(det, ctx.cfg.train.scene, ctx.cfg.eval.eval_seed,
                                        ctx.cfg.eval.eval_scenes,
                                        ctx.cfg.train.net.categories,
                                        ctx.cfg.eval.iou_threshold);
    atomic_write_file(ctx.fresh("results.txt"), r.table());
    atomic_write_file(ctx.fresh("results.kv"), r.key_values());
    std::printf("eval: mAP %.4f CorLoc %.4f -> %s\n", r.map, r.mean_corloc,
                ctx.path("results.txt").c_str());
}

struct AblationRow {
    std::string name;
    bool rank, img_or_feat, adv;
};

void cmd_ablate(Context& ctx, const std::string& mode_name, int seeds, int steps_override) {
    ctx.ensure_out_dir();
    const TrainMode mode = train_mode_from_string(mode_name);
    const char* pixel_term = mode == TrainMode::supervised ? "img" : "feat";
    const std::vector<AblationRow> rows = {
        {std::string("adv & ") + pixel_term + " & rank", true, true, true},
        {std::string("adv & ") + pixel_term, false, true, true},
        {"adv & rank", true, false, true},
        {std::string(pixel_term) + " & rank", true, true, false},
    };

    std::string table = "# ablation (" + to_string(mode) + ")\n";
    table += mode == TrainMode::supervised
                 ? "# config | per-seed ssim | mean ssim | mean rmse\n"
                 : "# config | per-seed map | mean map | mean corloc\n";
    for (const auto& row : rows) {
        double metric_sum = 0.0, second_sum = 0.0;
        std::string per_seed;
        for (int s = 0; s < seeds; ++s) {
            TrainConfig tcfg = ctx.cfg.train;
            tcfg.mode = mode;
            tcfg.seed = static_cast<std::uint64_t>(s);
            tcfg.use_rank = row.rank;
            tcfg.use_img = row.img_or_feat;
            tcfg.use_feat = row.img_or_feat;
            tcfg.use_adv = row.adv;
            if (steps_override >= 0) tcfg.steps = steps_override;
            TrainResult r = train(tcfg);
            double metric = 0.0, second = 0.0;
            if (mode == TrainMode::supervised) {
                SynthEvalResult synth = evaluate_synthesis(
                    r.nets, tcfg.scene, ctx.cfg.eval.eval_seed, ctx.cfg.eval.eval_scenes);
                metric = synth.mean_ssim;
                second = synth.mean_rmse;
            } else {
                SceneSpec weak = tcfg.scene_for_mode();
                auto scenes = generate_dataset(tcfg.dataset_seed, weak, tcfg.dataset_scenes);
                PseudoGT pseudo = extract_pseudo_gt_dataset(scenes, r.nets, ctx.cfg.discovery);
                Detector det = train_detector(pseudo, ctx.cfg.detector,
                                              ctx.cfg.discovery.proposals,
                                              tcfg.net.categories, tcfg.net.patch_size,
                                              tcfg.net.in_channels, tcfg.seed);
                EvalResult ev = evaluate_detector_on(det, tcfg.scene, ctx.cfg.eval.eval_seed,
                                                     ctx.cfg.eval.eval_scenes,
                                                     tcfg.net.categories,
                                                     ctx.cfg.eval.iou_threshold);
                metric = ev.map;
                second = ev.mean_corloc;
            }
            metric_sum += metric;
            second_sum += second;
            char buf[32];
            std::snprintf(buf, sizeof(buf), " %.4f", metric);
            per_seed += buf;
        }
        char line[256];
        std::snprintf(line, sizeof(line), "%-18s |%s | %.4f | %.4f\n", row.name.c_str(),
                      per_seed.c_str(), metric_sum / seeds, second_sum / seeds);
        table += line;
        std::fputs(line, stdout);
    }
    atomic_write_file(ctx.fresh("ablation_" + to_string(mode) + ".txt"), table);
    std::printf("ablate: wrote %s\n", ctx.path("ablation_" + to_string(mode) + ".txt").c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generative ranking-adversarial object discovery"};
    app.require_subcommand(0, 1);

    std::string config_path, out_dir;
    bool force = false, dump_config = false;
    std::int64_t seed_override = -1;
    app.add_option("--config", config_path, "config file (sectioned key = value)");
    app.add_option("--out", out_dir, "output directory (default $RANKGAN_OUT or ./out)");
    app.add_flag("--force", force, "overwrite existing outputs");
    app.add_flag("--dump-config", dump_config, "print the effective config and exit");
    app.add_option("--seed", seed_override, "override the training seed");

    auto* c_gen = app.add_subcommand("gen-data", "write a seeded scene dataset");
    std::string split = "train";
    int gen_count = -1;
    c_gen->add_option("--split", split, "train or eval")
        ->check(CLI::IsMember({"train", "eval"}));
    c_gen->add_option("--scenes", gen_count, "scene count override");

    auto* c_pre = app.add_subcommand("pretrain-encoder", "GAP-classification pretraining");

    auto* c_train = app.add_subcommand("train", "adversarial training per config");
    std::string init_path;
    int steps_override = -1;
    c_train->add_option("--init", init_path, "start from a checkpoint (skips pretraining)");
    c_train->add_option("--steps", steps_override, "step-count override");

    auto* c_synth = app.add_subcommand("synth", "synthesize one instance from a scene");
    std::string ckpt_path;
    std::uint64_t scene_seed = 0;
    int category = -1;
    c_synth->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
    c_synth->add_option("--scene-seed", scene_seed, "scene seed");
    c_synth->add_option("--category", category, "target category (default: first instance)");

    auto* c_disc = app.add_subcommand("discover", "extract pseudo ground truth");
    std::string disc_ckpt;
    int heat_exports = 2;
    c_disc->add_option("--ckpt", disc_ckpt, "model checkpoint")->required();
    c_disc->add_option("--heat-exports", heat_exports, "scenes with heat-map dumps");

    auto* c_det = app.add_subcommand("train-detector", "train the proposal classifier");
    std::string pseudo_dir, det_ckpt;
    bool augment = false;
    c_det->add_option("--pseudo", pseudo_dir, "pseudo annotation directory");
    c_det->add_option("--ckpt", det_ckpt, "model checkpoint (config source / augmentation)");
    c_det->add_flag("--augment", augment, "add one synthesized sample per instance");

    auto* c_eval = app.add_subcommand("eval", "evaluate a detector (mAP, CorLoc)");
    std::string eval_det;
    c_eval->add_option("--detector", eval_det, "detector file");

    auto* c_abl = app.add_subcommand("ablate", "loss-combination grid");
    std::string abl_mode = "supervised";
    int abl_seeds = 3, abl_steps = -1;
    c_abl->add_option("--mode", abl_mode, "supervised or weak")
        ->check(CLI::IsMember({"supervised", "weak"}));
    c_abl->add_option("--seeds", abl_seeds, "number of seeds");
    c_abl->add_option("--steps", abl_steps, "step-count override");

    CLI11_PARSE(app, argc, argv);

    Context ctx;
    try {
        ctx.cfg = config_path.empty() ? default_config() : parse_config_file(config_path);
        if (seed_override >= 0)
            ctx.cfg.train.seed = static_cast<std::uint64_t>(seed_override);
        if (dump_config) {
            std::fputs(serialize_config(ctx.cfg).c_str(), stdout);
            return 0;
        }
        if (app.get_subcommands().empty()) {
            std::fputs(app.help().c_str(), stdout);
            return 0;
        }
        ctx.force = force;
        if (out_dir.empty()) {
            const char* env = std::getenv("RANKGAN_OUT");
            out_dir = env && *env ? env : "out";
        }
        ctx.out_dir = out_dir;

        if (c_gen->parsed()) cmd_gen_data(ctx, split, gen_count);
        if (c_pre->parsed()) cmd_pretrain(ctx);
        if (c_train->parsed()) {
            if (steps_override >= 0) ctx.cfg.train.steps = steps_override;
            cmd_train(ctx, init_path);
        }
        if (c_synth->parsed()) cmd_synth(ctx, ckpt_path, scene_seed, category);
        if (c_disc->parsed()) cmd_discover(ctx, disc_ckpt, heat_exports);
        if (c_det->parsed()) cmd_train_detector(ctx, pseudo_dir, det_ckpt, augment);
        if (c_eval->parsed()) cmd_eval(ctx, eval_det);
        if (c_abl->parsed()) cmd_ablate(ctx, abl_mode, abl_seeds, abl_steps);
    } catch (const std::exception& e) {
        ctx.cleanup_partial();
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
