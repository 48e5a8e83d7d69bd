#pragma once

#include <cstdint>
#include <vector>

#include "rankgan/adam.hpp"
#include "rankgan/geometry.hpp"
#include "rankgan/heatmap.hpp"
#include "rankgan/networks.hpp"
#include "rankgan/scenegen.hpp"

namespace rankgan {

struct ProposalConfig {
    std::vector<int> windows = {8, 12, 16};
    int stride = 4;
};

// Deterministic multi-scale sliding-window proposals, deduplicated.
std::vector<Box> grid_proposals(int image_size, const ProposalConfig& cfg);

struct DiscoveryConfig {
    double cc_threshold = 0.5;                    // fraction of the heat-map max
    std::vector<double> scales = {0.55, 0.75, 1.0};
    int max_instances = 3;                        // components per category
    double center_dilate = 4.0;                   // px around a component for box search
    ProposalConfig proposals;
};

// Max over scales of rectified NCC at every window top-left position.
HeatMap template_match(const Tensor& image, const Tensor& tmpl,
                       const std::vector<double>& scales);

struct ScaledMatch {
    HeatMap heat;
    std::vector<double> scale_at;  // winning scale per position (0 where no window fit)
};
ScaledMatch template_match_detailed(const Tensor& image, const Tensor& tmpl,
                                    const std::vector<double>& scales);

struct Component {
    Box box;       // tight bounds of the thresholded cells
    double peak = 0.0;
    int peak_y = 0, peak_x = 0;
    std::vector<std::uint8_t> mask;  // full-resolution binary mask
};

// Binarize at threshold_fraction * max, label 8-connected components,
// sorted by peak value descending.
std::vector<Component> connected_components(const HeatMap& map, double threshold_fraction);

// CAM -> components -> per-instance synthesis -> template match -> boxes.
// Never reads privileged boxes.
std::vector<Instance> extract_pseudo_gt(const Scene& scene, const Networks& nets,
                                        const DiscoveryConfig& cfg);

struct PseudoScene {
    Tensor image;
    std::vector<Instance> boxes;
};
using PseudoGT = std::vector<PseudoScene>;

PseudoGT extract_pseudo_gt_dataset(const std::vector<Scene>& scenes, const Networks& nets,
                                   const DiscoveryConfig& cfg);

// Adds, per discovered instance, one synthesized copy pasted at the instance
// location in a copy of its scene. Doubles the training-sample count.
PseudoGT augment_with_synth(const PseudoGT& pseudo, const Networks& nets,
                            const DiscoveryConfig& cfg);

struct DetectorConfig {
    int steps = 800;
    int batch = 32;
    double lr = 1e-3;
    int hidden = 32;
    double nms_iou = 0.3;
    double score_threshold = 0.5;
    double pos_iou = 0.5;  // proposals above this IoU with a pseudo box are positives
    double neg_iou = 0.2;  // proposals below this are background
};

// Proposal-scoring classifier standing in for a full detector.
struct Detector {
    int patch_size = 16;
    int channels = 1;
    int categories = 5;
    DetectorConfig cfg;
    ProposalConfig proposals;
    Tensor w1, b1, w2, b2;  // MLP over flattened crops; classes = categories + background

    Tensor scores(const Tensor& crop, bool param_grad = true) const;  // softmax [K+1]
    std::vector<std::pair<std::string, Tensor>> named_params() const;
};

Detector train_detector(const PseudoGT& pseudo, const DetectorConfig& cfg,
                        const ProposalConfig& proposals, int categories, int patch_size,
                        int channels, std::uint64_t seed);

// Scores every grid proposal per category, then per-category NMS and the
// score threshold.
std::vector<Box> detect(const Detector& det, const Tensor& image);

std::vector<Box> nms(std::vector<Box> boxes, double iou_threshold);

}  // namespace rankgan
