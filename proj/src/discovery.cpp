#include "rankgan/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <set>

#include "rankgan/imageops.hpp"
#include "rankgan/kernels.hpp"
#include "rankgan/metrics.hpp"

namespace rankgan {

std::vector<Box> grid_proposals(int image_size, const ProposalConfig& cfg) {
    if (cfg.windows.empty()) throw ParameterError("grid_proposals: no window sizes");
    if (cfg.stride < 1) throw ParameterError("grid_proposals: stride must be >= 1");
    std::vector<Box> out;
    std::set<std::tuple<int, int, int>> seen;
    for (int win : cfg.windows) {
        if (win < 1 || win > image_size) continue;
        for (int y = 0; y + win <= image_size; y += cfg.stride) {
            for (int x = 0; x + win <= image_size; x += cfg.stride) {
                if (!seen.insert({x, y, win}).second) continue;
                out.push_back(Box{static_cast<double>(x), static_cast<double>(y),
                                  static_cast<double>(win), static_cast<double>(win)});
            }
        }
    }
    return out;
}

ScaledMatch template_match_detailed(const Tensor& image, const Tensor& tmpl,
                                    const std::vector<double>& scales) {
    if (image.shape().size() != 3 || tmpl.shape().size() != 3)
        throw DimensionError("template_match: image and template must be [C,H,W]");
    if (image.dim(0) != tmpl.dim(0))
        throw DimensionError("template_match: channel mismatch");
    if (scales.empty()) throw ParameterError("template_match: no scales");
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    const int th = tmpl.dim(1), tw = tmpl.dim(2);

    ScaledMatch result;
    result.heat = HeatMap(h, w, HeatMap::Source::template_match);
    result.scale_at.assign(static_cast<std::size_t>(h) * w, 0.0);

    int used = 0;
    std::vector<double> heat_s(static_cast<std::size_t>(h) * w);
    for (double s : scales) {
        const int sh = std::max(2, static_cast<int>(std::lround(th * s)));
        const int sw = std::max(2, static_cast<int>(std::lround(tw * s)));
        if (sh > h || sw > w) {
            std::fprintf(stderr, "template_match: scale %.3f skipped (window %dx%d > image)\n",
                         s, sh, sw);
            continue;
        }
        Tensor scaled = resize_bilinear(tmpl, sh, sw);
        kernels::ncc_match(image.values().data(), c, h, w, scaled.values().data(), sh, sw,
                           heat_s.data());
        for (std::size_t i = 0; i < heat_s.size(); ++i) {
            if (heat_s[i] > result.heat.scores[i]) {
                result.heat.scores[i] = heat_s[i];
                result.scale_at[i] = s;
            }
        }
        ++used;
    }
    if (used == 0) throw ParameterError("template_match: no scale fits inside the image");
    return result;
}

HeatMap template_match(const Tensor& image, const Tensor& tmpl,
                       const std::vector<double>& scales) {
    return template_match_detailed(image, tmpl, scales).heat;
}

std::vector<Component> connected_components(const HeatMap& map, double threshold_fraction) {
    if (!(threshold_fraction > 0.0 && threshold_fraction <= 1.0))
        throw ParameterError("connected_components: threshold fraction must lie in (0,1]");
    const double mx = map.max_value();
    std::vector<Component> out;
    if (mx <= 0.0) return out;
    const double thresh = threshold_fraction * mx;
    const int h = map.height, w = map.width;
    std::vector<std::uint8_t> bin(static_cast<std::size_t>(h) * w, 0);
    for (std::size_t i = 0; i < bin.size(); ++i) bin[i] = map.scores[i] >= thresh ? 1 : 0;

    std::vector<std::uint8_t> visited(bin.size(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t start = static_cast<std::size_t>(y) * w + x;
            if (!bin[start] || visited[start]) continue;
            Component comp;
            comp.mask.assign(bin.size(), 0);
            int x0 = x, x1 = x, y0 = y, y1 = y;
            std::deque<std::pair<int, int>> queue{{y, x}};
            visited[start] = 1;
            while (!queue.empty()) {
                auto [cy, cx] = queue.front();
                queue.pop_front();
                const std::size_t ci = static_cast<std::size_t>(cy) * w + cx;
                comp.mask[ci] = 1;
                if (map.scores[ci] > comp.peak) {
                    comp.peak = map.scores[ci];
                    comp.peak_y = cy;
                    comp.peak_x = cx;
                }
                x0 = std::min(x0, cx); x1 = std::max(x1, cx);
                y0 = std::min(y0, cy); y1 = std::max(y1, cy);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (!dy && !dx) continue;
                        const int ny = cy + dy, nx = cx + dx;
                        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                        const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                        if (bin[ni] && !visited[ni]) {
                            visited[ni] = 1;
                            queue.emplace_back(ny, nx);
                        }
                    }
                }
            }
            comp.box = Box{static_cast<double>(x0), static_cast<double>(y0),
                           static_cast<double>(x1 - x0 + 1), static_cast<double>(y1 - y0 + 1)};
            comp.box.score = comp.peak;
            out.push_back(std::move(comp));
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Component& a, const Component& b) { return a.peak > b.peak; });
    return out;
}

namespace {

// Location condition for one discovered instance: the category CAM restricted
// to the component, renormalized, at the location-encoder resolution.
HeatMap component_location_map(const HeatMap& cam_img, const Component& comp, int heat_res) {
    HeatMap masked(cam_img.height, cam_img.width, HeatMap::Source::cam);
    for (std::size_t i = 0; i < masked.scores.size(); ++i)
        masked.scores[i] = comp.mask[i] ? cam_img.scores[i] : 0.0;
    HeatMap small = resize_heatmap(masked, heat_res, heat_res);
    for (double& s : small.scores) s = s > 0.0 ? s : 0.0;
    small.normalize_max();
    return small;
}

}  // namespace

std::vector<Instance> extract_pseudo_gt(const Scene& scene, const Networks& nets,
                                        const DiscoveryConfig& cfg) {
    const int hr = nets.cfg.heat_res();
    std::vector<Instance> out;
    Tensor vis = encode_image(nets.encoder, scene.image(), false).detached();
    for (int cat : scene.labels()) {
        HeatMap cam_img = class_activation_map(nets.encoder, scene.image(), cat);
        auto comps = connected_components(cam_img, cfg.cc_threshold);
        if (comps.empty()) {
            std::fprintf(stderr, "discover: no component above threshold for category %d\n",
                         cat);
            continue;
        }
        const int n = std::min<int>(cfg.max_instances, static_cast<int>(comps.size()));
        for (int i = 0; i < n; ++i) {
            const Component& comp = comps[static_cast<std::size_t>(i)];
            HeatMap locmap = component_location_map(cam_img, comp, hr);
            Tensor loc = encode_location(nets.locenc, locmap, hr, false);
            Tensor tmpl = generate(nets.generator, build_latent(vis, loc), false).detached();
            ScaledMatch match = template_match_detailed(scene.image(), tmpl, cfg.scales);

            // Best window whose center falls near the component.
            const double cx0 = comp.box.x - cfg.center_dilate;
            const double cy0 = comp.box.y - cfg.center_dilate;
            const double cx1 = comp.box.x2() + cfg.center_dilate;
            const double cy1 = comp.box.y2() + cfg.center_dilate;
            double best = 0.0;
            Box best_box;
            bool found = false;
            const int th = tmpl.dim(1), tw = tmpl.dim(2);
            for (int y = 0; y < match.heat.height; ++y) {
                for (int x = 0; x < match.heat.width; ++x) {
                    const double score = match.heat.at(y, x);
                    if (score <= best) continue;
                    const double s = match.scale_at[static_cast<std::size_t>(y) *
                                                    match.heat.width + x];
                    if (s <= 0.0) continue;
                    const double bw = std::lround(tw * s);
                    const double bh = std::lround(th * s);
                    const double mcx = x + bw / 2.0;
                    const double mcy = y + bh / 2.0;
                    if (mcx < cx0 || mcx > cx1 || mcy < cy0 || mcy > cy1) continue;
                    best = score;
                    best_box = Box{static_cast<double>(x), static_cast<double>(y), bw, bh,
                                   score, cat};
                    found = true;
                }
            }
            if (found) out.push_back({cat, best_box});
        }
    }
    return out;
}

PseudoGT extract_pseudo_gt_dataset(const std::vector<Scene>& scenes, const Networks& nets,
                                   const DiscoveryConfig& cfg) {
    PseudoGT out;
    out.reserve(scenes.size());
    for (const Scene& scene : scenes)
        out.push_back({scene.image(), extract_pseudo_gt(scene, nets, cfg)});
    return out;
}

PseudoGT augment_with_synth(const PseudoGT& pseudo, const Networks& nets,
                            const DiscoveryConfig& cfg) {
    (void)cfg;
    PseudoGT out = pseudo;
    const int hr = nets.cfg.heat_res();
    for (const PseudoScene& ps : pseudo) {
        Tensor vis = encode_image(nets.encoder, ps.image, false).detached();
        for (const Instance& inst : ps.boxes) {
            HeatMap locmap = box_mask_map(inst.box, ps.image.dim(1), ps.image.dim(2), hr, hr);
            Tensor loc = encode_location(nets.locenc, locmap, hr, false);
            Tensor synth = generate(nets.generator, build_latent(vis, loc), false).detached();
            PseudoScene extra;
            extra.image = paste_patch(ps.image, synth, inst.box);
            extra.boxes = {inst};
            out.push_back(std::move(extra));
        }
    }
    return out;
}

// ---- detector ----

Tensor Detector::scores(const Tensor& crop, bool param_grad) const {
    Tensor x = reshape(crop, {static_cast<int>(crop.size())});
    Tensor h = relu(fully_connected(x, param_grad ? w1 : w1.detached(),
                                    param_grad ? b1 : b1.detached()));
    Tensor logits = fully_connected(h, param_grad ? w2 : w2.detached(),
                                    param_grad ? b2 : b2.detached());
    return softmax(logits, 0);
}

std::vector<std::pair<std::string, Tensor>> Detector::named_params() const {
    return {{"detector.fc1.w", w1}, {"detector.fc1.b", b1},
            {"detector.fc2.w", w2}, {"detector.fc2.b", b2}};
}

Detector train_detector(const PseudoGT& pseudo, const DetectorConfig& cfg,
                        const ProposalConfig& proposals, int categories, int patch_size,
                        int channels, std::uint64_t seed) {
    bool any = false;
    for (const auto& ps : pseudo) any = any || !ps.boxes.empty();
    if (!any) throw ParameterError("train_detector: empty pseudo ground truth");

    Rng rng(Rng::mix(seed, 0xde7ec7));
    Detector det;
    det.patch_size = patch_size;
    det.channels = channels;
    det.categories = categories;
    det.cfg = cfg;
    det.proposals = proposals;
    const int in_dim = channels * patch_size * patch_size;
    const int classes = categories + 1;  // background last
    {
        const double bound1 = std::sqrt(6.0 / (in_dim + cfg.hidden));
        std::vector<double> w1v(static_cast<std::size_t>(cfg.hidden) * in_dim);
        for (auto& v : w1v) v = rng.uniform(-bound1, bound1);
        det.w1 = Tensor::parameter({cfg.hidden, in_dim}, std::move(w1v), "detector.fc1.w");
        det.b1 = Tensor::parameter({cfg.hidden}, std::vector<double>(cfg.hidden, 0.0),
                                   "detector.fc1.b");
        const double bound2 = std::sqrt(6.0 / (cfg.hidden + classes));
        std::vector<double> w2v(static_cast<std::size_t>(classes) * cfg.hidden);
        for (auto& v : w2v) v = rng.uniform(-bound2, bound2);
        det.w2 = Tensor::parameter({classes, cfg.hidden}, std::move(w2v), "detector.fc2.w");
        det.b2 = Tensor::parameter({classes}, std::vector<double>(classes, 0.0),
                                   "detector.fc2.b");
    }

    // Training pool: pseudo boxes and high-IoU proposals as positives,
    // low-IoU proposals as background.
    struct Sample {
        Tensor crop;
        int label;
    };
    std::vector<Sample> samples;
    for (const auto& ps : pseudo) {
        const int image_size = ps.image.dim(1);
        auto props = grid_proposals(image_size, proposals);
        int positives = 0;
        for (const Instance& inst : ps.boxes) {
            samples.push_back({crop_resize(ps.image, inst.box, patch_size, patch_size),
                               inst.category});
            ++positives;
        }
        std::vector<const Box*> negatives;
        for (const Box& p : props) {
            double best = 0.0;
            for (const Instance& inst : ps.boxes) best = std::max(best, iou(p, inst.box));
            if (best >= cfg.pos_iou) {
                int cat = -1;
                double cat_best = 0.0;
                for (const Instance& inst : ps.boxes) {
                    const double v = iou(p, inst.box);
                    if (v > cat_best) {
                        cat_best = v;
                        cat = inst.category;
                    }
                }
                samples.push_back({crop_resize(ps.image, p, patch_size, patch_size), cat});
                ++positives;
            } else if (best < cfg.neg_iou) {
                negatives.push_back(&p);
            }
        }
        const int want = std::max(2, 2 * positives);
        for (int i = 0; i < want && !negatives.empty(); ++i) {
            const Box* p = negatives[static_cast<std::size_t>(
                rng.uniform_int(static_cast<int>(negatives.size())))];
            samples.push_back({crop_resize(ps.image, *p, patch_size, patch_size), categories});
        }
    }

    std::vector<Tensor> params = {det.w1, det.b1, det.w2, det.b2};
    AdamState opt;
    opt.init(params, AdamConfig{cfg.lr, 0.9, 0.99, 1e-8});
    for (int step = 0; step < cfg.steps; ++step) {
        Tensor loss;
        for (int b = 0; b < cfg.batch; ++b) {
            const Sample& s = samples[static_cast<std::size_t>(
                rng.uniform_int(static_cast<int>(samples.size())))];
            Tensor probs = det.scores(s.crop, true);
            Tensor l = neg(log_floor(at_index(probs, static_cast<std::size_t>(s.label)),
                                     1e-12));
            loss = loss.defined() ? add(loss, l) : l;
        }
        loss = scale(loss, 1.0 / cfg.batch);
        for (Tensor& p : params) p.zero_grad();
        backward(loss);
        adam_step(params, opt);
    }
    return det;
}

std::vector<Box> nms(std::vector<Box> boxes, double iou_threshold) {
    std::stable_sort(boxes.begin(), boxes.end(),
                     [](const Box& a, const Box& b) { return a.score > b.score; });
    std::vector<Box> kept;
    for (const Box& b : boxes) {
        bool suppressed = false;
        for (const Box& k : kept)
            if (iou(b, k) > iou_threshold) suppressed = true;
        if (!suppressed) kept.push_back(b);
    }
    return kept;
}

std::vector<Box> detect(const Detector& det, const Tensor& image) {
    const int image_size = image.dim(1);
    auto props = grid_proposals(image_size, det.proposals);
    std::vector<std::vector<Box>> per_category(static_cast<std::size_t>(det.categories));
    for (const Box& p : props) {
        Tensor crop = crop_resize(image, p, det.patch_size, det.patch_size);
        Tensor probs = det.scores(crop, false);
        for (int c = 0; c < det.categories; ++c) {
            Box scored = p;
            scored.score = probs[static_cast<std::size_t>(c)];
            scored.category = c;
            per_category[static_cast<std::size_t>(c)].push_back(scored);
        }
    }
    std::vector<Box> out;
    for (auto& boxes : per_category) {
        auto kept = nms(std::move(boxes), det.cfg.nms_iou);
        for (const Box& b : kept)
            if (b.score >= det.cfg.score_threshold) out.push_back(b);
    }
    return out;
}

}  // namespace rankgan
