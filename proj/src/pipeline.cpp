#include "rankgan/pipeline.hpp"

#include <algorithm>

#include "rankgan/imageops.hpp"

namespace rankgan {

SynthEvalResult evaluate_synthesis(const Networks& nets, const SceneSpec& spec,
                                   std::uint64_t dataset_seed, int count) {
    SceneSpec full = spec;
    full.supervision = Supervision::full;
    const int hr = nets.cfg.heat_res();
    const int ps = nets.cfg.patch_size;
    SynthEvalResult out;
    double ssim_acc = 0.0, rmse_acc = 0.0;
    for (int i = 0; i < count; ++i) {
        Scene scene = generate_scene(Rng::mix(dataset_seed, static_cast<std::uint64_t>(i)),
                                     full);
        Tensor vis = encode_image(nets.encoder, scene.image(), false).detached();
        for (const Instance& inst : scene.boxes()) {
            HeatMap mask = box_mask_map(inst.box, scene.height(), scene.width(), hr, hr);
            Tensor loc = encode_location(nets.locenc, mask, hr, false);
            Tensor synth = generate(nets.generator, build_latent(vis, loc), false);
            Tensor truth = crop_resize(scene.image(), inst.box, ps, ps);
            ssim_acc += ssim(synth, truth);
            rmse_acc += rmse(synth, truth);
            ++out.samples;
        }
    }
    if (out.samples > 0) {
        out.mean_ssim = ssim_acc / out.samples;
        out.mean_rmse = rmse_acc / out.samples;
    }
    return out;
}

EvalResult evaluate_detector_on(const Detector& det, const SceneSpec& spec,
                                std::uint64_t dataset_seed, int count, int categories,
                                double iou_threshold) {
    SceneSpec full = spec;
    full.supervision = Supervision::full;
    std::map<int, CategoryDetections> per_cat;
    for (int c = 0; c < categories; ++c) per_cat[c] = CategoryDetections{};
    for (int i = 0; i < count; ++i) {
        Scene scene = generate_scene(Rng::mix(dataset_seed, static_cast<std::uint64_t>(i)),
                                     full);
        auto detections = detect(det, scene.image());
        for (int c = 0; c < categories; ++c) {
            std::vector<Box> dets, gts;
            for (const Box& b : detections)
                if (b.category == c) dets.push_back(b);
            for (const auto& inst : scene.privileged_boxes())
                if (inst.category == c) gts.push_back(inst.box);
            per_cat[c].detections.push_back(dets);
            per_cat[c].ground_truth.push_back(gts);
        }
    }
    return evaluate_detections(per_cat, iou_threshold);
}

LocalizationEval evaluate_localization(const Networks& nets, const DiscoveryConfig& dcfg,
                                       const SceneSpec& spec, std::uint64_t dataset_seed,
                                       int count, std::uint64_t baseline_seed) {
    SceneSpec weak = spec;
    weak.supervision = Supervision::weak;
    weak.max_objects = 1;
    Rng baseline(Rng::mix(baseline_seed, 0xba5eULL));
    LocalizationEval out;
    int correct = 0, random_correct = 0, boxes_total = 0, boxes_hit = 0;
    for (int i = 0; i < count; ++i) {
        Scene scene = generate_scene(Rng::mix(dataset_seed, static_cast<std::uint64_t>(i)),
                                     weak);
        auto pseudo = extract_pseudo_gt(scene, nets, dcfg);

        // Privileged access is evaluation-only, after extraction.
        const auto& truth = scene.privileged_boxes();
        const Box& gt = truth[0].box;

        const Box* top = nullptr;
        for (const auto& inst : pseudo) {
            ++boxes_total;
            if (iou(inst.box, gt) > 0.5 && inst.category == truth[0].category) ++boxes_hit;
            if (inst.category != truth[0].category) continue;
            if (!top || inst.box.score > top->score) top = &inst.box;
        }
        if (top && iou(*top, gt) > 0.5) ++correct;

        const double side = 8 + baseline.uniform_int(8);
        Box rb{static_cast<double>(baseline.uniform_int(
                   std::max(1, scene.width() - static_cast<int>(side)))),
               static_cast<double>(baseline.uniform_int(
                   std::max(1, scene.height() - static_cast<int>(side)))),
               side, side};
        if (iou(rb, gt) > 0.5) ++random_correct;
        ++out.scenes;
    }
    if (out.scenes > 0) {
        out.corloc = static_cast<double>(correct) / out.scenes;
        out.random_corloc = static_cast<double>(random_correct) / out.scenes;
    }
    if (boxes_total > 0)
        out.iou_rate = static_cast<double>(boxes_hit) / boxes_total;
    return out;
}

}  // namespace rankgan
