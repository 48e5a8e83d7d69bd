#include "rankgan/training.hpp"

#include <algorithm>
#include <cmath>

#include "rankgan/imageops.hpp"

namespace rankgan {

void TrainConfig::validate() const {
    net.validate();
    coeffs.validate();
    if (batch < 1) throw ConfigError("train: batch must be >= 1");
    if (steps < 0) throw ConfigError("train: steps must be >= 0");
    if (d_steps < 1) throw ConfigError("train: d_steps must be >= 1");
    if (k_top < 1) throw ConfigError("train: k_top must be >= 1");
    if (dataset_scenes < 1) throw ConfigError("train: dataset_scenes must be >= 1");
    if (pretrain_steps < 0) throw ConfigError("train: pretrain_steps must be >= 0");
    if (scene.image_size != net.scene_size)
        throw ConfigError("train: scene image_size must match net scene_size");
    if (scene.channels != net.in_channels)
        throw ConfigError("train: scene channels must match net in_channels");
}

SceneSpec TrainConfig::scene_for_mode() const {
    SceneSpec s = scene;
    s.supervision = mode == TrainMode::weak ? Supervision::weak : Supervision::full;
    return s;
}

TrainingPair select_pairs(const Scene& scene, int target_category, TrainMode mode,
                          const CategoryBank& bank, int patch_size, Rng& rng) {
    TrainingPair pair;
    pair.category = target_category;
    const int k = bank.category_count();

    if (mode == TrainMode::weak) {
        pair.xpos = bank.sample(target_category, rng.next());
        pair.neg_category = (target_category + 1 + rng.uniform_int(k - 1)) % k;
        pair.xneg = bank.sample(pair.neg_category, rng.next());
        return pair;
    }

    const auto& instances = scene.boxes();
    std::vector<const Instance*> targets, negatives;
    for (const auto& inst : instances) {
        if (inst.category == target_category) targets.push_back(&inst);
        else negatives.push_back(&inst);
    }
    if (targets.empty())
        throw ParameterError("select_pairs: scene does not contain category " +
                             std::to_string(target_category));
    const Instance* target = targets[static_cast<std::size_t>(
        rng.uniform_int(static_cast<int>(targets.size())))];
    pair.region = target->box;
    pair.has_region = true;
    pair.xpos = crop_resize(scene.image(), target->box, patch_size, patch_size);
    if (!negatives.empty()) {
        const Instance* neg = negatives[static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(negatives.size())))];
        pair.neg_category = neg->category;
        pair.xneg = crop_resize(scene.image(), neg->box, patch_size, patch_size);
    } else {
        // Single-category scene: fall back to a bank negative.
        pair.neg_category = (target_category + 1 + rng.uniform_int(k - 1)) % k;
        pair.xneg = bank.sample(pair.neg_category, rng.next());
    }
    return pair;
}

std::vector<Box> top_k_boxes(const HeatMap& map, const std::vector<Box>& proposals, int k) {
    if (proposals.empty()) throw ParameterError("top_k_boxes: empty proposal list");
    if (k < 1) throw ParameterError("top_k_boxes: k must be >= 1");

    struct Scored {
        Box box;
        double score;
        double area;
        std::size_t index;
    };
    std::vector<Scored> scored;
    scored.reserve(proposals.size());
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        const Box& b = proposals[i];
        const int x0 = std::max(0, static_cast<int>(std::floor(b.x)));
        const int y0 = std::max(0, static_cast<int>(std::floor(b.y)));
        const int x1 = std::min(map.width, static_cast<int>(std::ceil(b.x + b.w)));
        const int y1 = std::min(map.height, static_cast<int>(std::ceil(b.y + b.h)));
        double acc = 0.0;
        int cells = 0;
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
                acc += map.at(y, x);
                ++cells;
            }
        scored.push_back({b, cells > 0 ? acc / cells : 0.0, b.area(), i});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.area != b.area) return a.area < b.area;
        return a.index < b.index;
    });
    std::vector<Box> out;
    const int n = std::min<int>(k, static_cast<int>(scored.size()));
    for (int i = 0; i < n; ++i) {
        Box b = scored[static_cast<std::size_t>(i)].box;
        b.score = scored[static_cast<std::size_t>(i)].score;
        out.push_back(b);
    }
    return out;
}

void init_trainer_state(TrainerState& state, const Networks& nets, const TrainConfig& cfg) {
    auto eg = nets.eg_params();
    auto d = nets.disc_params();
    state.opt_eg.init(eg, cfg.adam);
    state.opt_d.init(d, cfg.adam);
    state.rng = Rng(Rng::mix(cfg.seed, 0x7a13));
    state.step = 0;
    state.proposals = grid_proposals(cfg.net.scene_size, DiscoveryConfig{}.proposals);
}

namespace {

// Location condition for one target: supervised uses the ground-truth box
// mask, weak uses the current class activation map.
HeatMap location_map(const Scene& scene, const TrainingPair& pair, const Networks& nets,
                     TrainMode mode) {
    const int hr = nets.cfg.heat_res();
    if (mode == TrainMode::supervised) {
        if (!pair.has_region)
            throw ParameterError("train: supervised pair without a region");
        return box_mask_map(pair.region, scene.height(), scene.width(), hr, hr);
    }
    return nets.encoder.cam_raw(scene.image(), pair.category);
}

void zero_grads(const std::vector<Tensor>& params) {
    for (const Tensor& p : params) {
        Tensor t = p;
        t.zero_grad();
    }
}

}  // namespace

LossReport train_step(const TrainConfig& cfg, const std::vector<const Scene*>& batch,
                      Networks& nets, TrainerState& state, std::uint64_t step_index) {
    if (batch.empty()) throw ParameterError("train_step: empty batch");
    CategoryBank bank(cfg.net.patch_size, cfg.net.in_channels, cfg.scene.rot_jitter,
                      cfg.scene.intensity_lo, cfg.scene.intensity_hi,
                      cfg.scene.shape_jitter);
    Rng rng(Rng::mix(cfg.seed, 0x57e9, step_index));
    const int hr = cfg.net.heat_res();
    const bool weak = cfg.mode == TrainMode::weak;

    // Pair and location selection, fixed for the whole step.
    struct Item {
        const Scene* scene;
        TrainingPair pair;
        HeatMap heat;
    };
    std::vector<Item> items;
    for (const Scene* scene : batch) {
        auto labels = scene->labels();
        const int cat = labels[static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(labels.size())))];
        Item item{scene, select_pairs(*scene, cat, cfg.mode, bank, cfg.net.patch_size, rng),
                  HeatMap{}};
        item.heat = location_map(*scene, item.pair, nets, cfg.mode);
        items.push_back(std::move(item));
    }

    auto synth_no_grad = [&](const Item& item) {
        Tensor vis = encode_image(nets.encoder, item.scene->image(), false);
        Tensor loc = encode_location(nets.locenc, item.heat, hr, false);
        return generate(nets.generator, build_latent(vis, loc), false).detached();
    };

    LossReport report;
    report.mode = cfg.mode;

    // ---- D phases ----
    auto disc_params = nets.disc_params();
    if (cfg.use_adv) {
        for (int dstep = 0; dstep < cfg.d_steps; ++dstep) {
            std::vector<Tensor> real_scores, fake_scores;
            for (const Item& item : items) {
                Tensor s = synth_no_grad(item);
                real_scores.push_back(
                    discriminate(nets.discriminator, item.pair.xpos, rng, true, true));
                fake_scores.push_back(discriminate(nets.discriminator, s, rng, true, true));
            }
            Tensor ldisc = discriminator_loss(real_scores, fake_scores);
            report.disc = ldisc.value();
            int real_right = 0, fake_right = 0;
            for (const Tensor& r : real_scores) real_right += r.value() > 0.5 ? 1 : 0;
            for (const Tensor& f : fake_scores) fake_right += f.value() < 0.5 ? 1 : 0;
            state.disc_real_acc = static_cast<double>(real_right) / items.size();
            state.disc_fake_acc = static_cast<double>(fake_right) / items.size();
            if (!std::isfinite(report.disc))
                throw Error("train_step: non-finite discriminator loss at step " +
                            std::to_string(step_index));
            zero_grads(disc_params);
            backward(ldisc);
            adam_step(disc_params, state.opt_d);
        }
    }

    // ---- G phase ----
    Tensor rank_total, img_total, feat_total, adv_total;
    std::vector<Tensor> fake_scores_g;
    for (const Item& item : items) {
        Tensor vis = encode_image(nets.encoder, item.scene->image(), true);
        Tensor loc = encode_location(nets.locenc, item.heat, hr, true);
        Tensor s = generate(nets.generator, build_latent(vis, loc), true);

        if (cfg.use_rank) {
            const bool pg = cfg.update_encoder_from_rank;
            Tensor fs = nets.ranking().features_any(s, pg);
            Tensor fp = nets.ranking().features_any(item.pair.xpos, pg);
            Tensor fn = nets.ranking().features_any(item.pair.xneg, pg);
            Tensor lr = ranking_loss(fs, fp, fn, cfg.coeffs.margin);
            rank_total = rank_total.defined() ? add(rank_total, lr) : lr;
        }
        if (!weak && cfg.use_img) {
            Tensor li = image_loss(s, item.pair.xpos);
            img_total = img_total.defined() ? add(img_total, li) : li;
        }
        if (weak && cfg.use_feat) {
            HeatMap cam_img = class_activation_map(nets.encoder, item.scene->image(),
                                                   item.pair.category);
            auto boxes = top_k_boxes(cam_img, state.proposals, cfg.k_top);
            std::vector<Tensor> feats;
            for (const Box& b : boxes) {
                Tensor crop = crop_resize(item.scene->image(), b, cfg.net.patch_size,
                                          cfg.net.patch_size);
                feats.push_back(nets.ranking().features_any(crop, false).detached());
            }
            Tensor fs = nets.ranking().features_any(s, cfg.update_encoder_from_rank);
            Tensor lf = feature_loss(fs, feats);
            feat_total = feat_total.defined() ? add(feat_total, lf) : lf;
        }
        if (cfg.use_adv)
            fake_scores_g.push_back(discriminate(nets.discriminator, s, rng, true, false));
    }
    if (cfg.use_adv) adv_total = adversarial_loss(fake_scores_g);

    LossTerms terms;
    terms.rank = rank_total;
    terms.img = img_total;
    terms.feat = feat_total;
    terms.adv = adv_total;
    terms.disc = report.disc;
    TotalLoss total = total_loss(terms, cfg.coeffs, cfg.mode);
    total.report.disc = report.disc;

    if (!std::isfinite(total.report.total)) {
        std::string bad = "total";
        if (!std::isfinite(total.report.rank)) bad = "rank";
        else if (!std::isfinite(total.report.img)) bad = "img";
        else if (!std::isfinite(total.report.feat)) bad = "feat";
        else if (!std::isfinite(total.report.adv)) bad = "adv";
        throw Error("train_step: non-finite '" + bad + "' loss at step " +
                    std::to_string(step_index));
    }

    auto eg_params = nets.eg_params();
    zero_grads(eg_params);
    backward(total.value);
    adam_step(eg_params, state.opt_eg);

    state.step = step_index + 1;
    return total.report;
}

void pretrain_generator(Networks& nets, const CategoryBank& bank, int steps, int batch,
                        std::uint64_t seed, AdamConfig adam,
                        const std::function<void(std::uint64_t, double)>& on_step) {
    const int hr = nets.cfg.heat_res();
    const int ps = nets.cfg.patch_size;
    const int ss = nets.cfg.scene_size;
    std::vector<Tensor> params;
    for (auto& t : nets.locenc.params()) params.push_back(t);
    for (auto& t : nets.generator.params()) params.push_back(t);
    AdamState opt;
    opt.init(params, adam);
    Tensor canvas = Tensor::full({nets.cfg.in_channels, ss, ss}, 0.08);
    for (int step = 0; step < steps; ++step) {
        Rng rng(Rng::mix(seed, 0x6e4, static_cast<std::uint64_t>(step)));
        Tensor loss;
        for (int b = 0; b < batch; ++b) {
            const int cat = rng.uniform_int(bank.category_count());
            Tensor patch = bank.sample(cat, rng.next());
            const double side = ps;
            Box at{static_cast<double>(rng.uniform_int(ss - ps + 1)),
                   static_cast<double>(rng.uniform_int(ss - ps + 1)), side, side};
            Tensor scene_like = paste_patch(canvas, patch, at);
            Tensor vis = nets.encoder.features(scene_like, false).detached();
            HeatMap mask = box_mask_map(at, ss, ss, hr, hr);
            Tensor loc = nets.locenc.features(mask, true);
            Tensor synth = nets.generator.forward(build_latent(vis, loc), true);
            Tensor l = image_loss(synth, patch);
            loss = loss.defined() ? add(loss, l) : l;
        }
        loss = scale(loss, 1.0 / batch);
        zero_grads(params);
        backward(loss);
        adam_step(params, opt);
        if (on_step) on_step(static_cast<std::uint64_t>(step), loss.value());
    }
}

void pretrain_encoder(Networks& nets, const CategoryBank& bank, int steps, int batch,
                      std::uint64_t seed, AdamConfig adam,
                      const std::function<void(std::uint64_t, double)>& on_step) {
    auto params = nets.encoder.params();
    AdamState opt;
    opt.init(params, adam);
    for (int step = 0; step < steps; ++step) {
        Rng rng(Rng::mix(seed, 0x9e7a, static_cast<std::uint64_t>(step)));
        Tensor loss;
        for (int b = 0; b < batch; ++b) {
            const int cat = rng.uniform_int(bank.category_count());
            Tensor patch = bank.sample(cat, rng.next());
            // Background/noise augmentation toward scene statistics, plus
            // random erasing so class evidence spreads over the whole shape
            // (keeps CAM peaks inside the object).
            std::vector<double> v = patch.values();
            const int ps = patch.dim(1);
            const double offset = rng.uniform(0.0, 0.15);
            for (auto& x : v) x = std::clamp(x + offset + 0.03 * rng.normal(), 0.0, 1.0);
            for (int erase = 0; erase < 2; ++erase) {
                if (rng.uniform() >= 0.4) continue;
                const int ew = 3 + rng.uniform_int(ps / 2 - 2);
                const int eh = 3 + rng.uniform_int(ps / 2 - 2);
                const int ex = rng.uniform_int(ps - ew + 1);
                const int ey = rng.uniform_int(ps - eh + 1);
                for (int ch = 0; ch < patch.dim(0); ++ch)
                    for (int y = ey; y < ey + eh; ++y)
                        for (int x = ex; x < ex + ew; ++x)
                            v[(static_cast<std::size_t>(ch) * ps + y) * ps + x] =
                                0.05 + offset;
            }
            Tensor augmented = Tensor::constant(patch.shape(), std::move(v));
            Tensor l = classification_loss(nets.encoder, augmented, cat);
            loss = loss.defined() ? add(loss, l) : l;
        }
        loss = scale(loss, 1.0 / batch);
        zero_grads(params);
        backward(loss);
        adam_step(params, opt);
        if (on_step) on_step(static_cast<std::uint64_t>(step), loss.value());
    }
}

TrainResult train(const TrainConfig& cfg, const Networks* init_nets,
                  const TrainCallbacks& callbacks) {
    cfg.validate();
    TrainResult result;
    result.nets = init_nets ? *init_nets : Networks::init(cfg.net, cfg.seed);
    init_trainer_state(result.state, result.nets, cfg);
    if (cfg.steps == 0) return result;

    const auto scenes = generate_dataset(cfg.dataset_seed, cfg.scene_for_mode(),
                                         cfg.dataset_scenes);
    CategoryBank bank(cfg.net.patch_size, cfg.net.in_channels, cfg.scene.rot_jitter,
                      cfg.scene.intensity_lo, cfg.scene.intensity_hi,
                      cfg.scene.shape_jitter);

    if (!init_nets && cfg.pretrain_steps > 0) {
        AdamConfig pre = cfg.adam;
        pre.lr = cfg.pretrain_lr;
        pretrain_encoder(result.nets, bank, cfg.pretrain_steps, cfg.pretrain_batch,
                         Rng::mix(cfg.seed, 0x93e), pre, callbacks.on_pretrain_step);
    }
    if (!init_nets && cfg.gen_pretrain_steps > 0) {
        AdamConfig pre = cfg.adam;
        pre.lr = cfg.pretrain_lr;
        pretrain_generator(result.nets, bank, cfg.gen_pretrain_steps, cfg.pretrain_batch,
                           Rng::mix(cfg.seed, 0x6e49), pre, callbacks.on_pretrain_step);
    }

    for (int step = 0; step < cfg.steps; ++step) {
        Rng pick(Rng::mix(cfg.seed, 0xba7c4, static_cast<std::uint64_t>(step)));
        std::vector<const Scene*> batch;
        for (int b = 0; b < cfg.batch; ++b)
            batch.push_back(&scenes[static_cast<std::size_t>(
                pick.uniform_int(static_cast<int>(scenes.size())))]);
        LossReport report = train_step(cfg, batch, result.nets, result.state,
                                       static_cast<std::uint64_t>(step));
        result.reports.push_back(report);
        if (callbacks.on_step) callbacks.on_step(static_cast<std::uint64_t>(step), report);
        if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 &&
            callbacks.on_checkpoint)
            callbacks.on_checkpoint(static_cast<std::uint64_t>(step + 1), result.nets,
                                    result.state);
    }
    return result;
}

}  // namespace rankgan
