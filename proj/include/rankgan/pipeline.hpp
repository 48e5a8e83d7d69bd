#pragma once

#include "rankgan/config.hpp"
#include "rankgan/discovery.hpp"
#include "rankgan/metrics.hpp"
#include "rankgan/networks.hpp"

namespace rankgan {

// Synthesis quality on held-out fully-annotated scenes: every instance is
// re-synthesized under its ground-truth location condition and compared with
// the true patch.
struct SynthEvalResult {
    double mean_ssim = 0.0;
    double mean_rmse = 0.0;
    int samples = 0;
};

SynthEvalResult evaluate_synthesis(const Networks& nets, const SceneSpec& spec,
                                   std::uint64_t dataset_seed, int count);

// Detector evaluation against privileged ground truth on a regenerated
// held-out dataset.
EvalResult evaluate_detector_on(const Detector& det, const SceneSpec& spec,
                                std::uint64_t dataset_seed, int count, int categories,
                                double iou_threshold = 0.5);

// Weak localization on single-object held-out scenes, with a seeded
// random-box baseline.
struct LocalizationEval {
    double corloc = 0.0;       // top pseudo box vs true box at IoU > 0.5
    double iou_rate = 0.0;     // fraction of pseudo boxes with IoU > 0.5
    double random_corloc = 0.0;
    int scenes = 0;
};

LocalizationEval evaluate_localization(const Networks& nets, const DiscoveryConfig& dcfg,
                                       const SceneSpec& spec, std::uint64_t dataset_seed,
                                       int count, std::uint64_t baseline_seed = 0x4a11d);

}  // namespace rankgan
