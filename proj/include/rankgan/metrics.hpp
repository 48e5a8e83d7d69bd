#pragma once

#include <map>
#include <string>
#include <vector>

#include "rankgan/geometry.hpp"
#include "rankgan/tensor.hpp"

namespace rankgan {

double iou(const Box& a, const Box& b);

// All-point interpolated AP at a strict IoU threshold ("more than" semantics),
// detections pooled across images. Each ground truth matches at most one
// detection, greedily in descending score order.
struct CategoryDetections {
    // Index-aligned per image.
    std::vector<std::vector<Box>> detections;
    std::vector<std::vector<Box>> ground_truth;
};

struct ApCounts {
    int tp = 0, fp = 0, fn = 0;
};

double average_precision(const CategoryDetections& d, double iou_threshold = 0.5,
                         ApCounts* counts = nullptr);

// Single-image convenience form.
double average_precision(const std::vector<Box>& detections, const std::vector<Box>& gts,
                         double iou_threshold = 0.5);

// Fraction of images whose top-scored box overlaps some ground truth with
// IoU > threshold. Every image must contain at least one ground truth.
double corloc(const CategoryDetections& d, double iou_threshold = 0.5);

// Structural similarity with a uniform window (default 7x7) and the standard
// constants on unit dynamic range; mean over valid window positions and
// channels. Inputs must share shape with values in [0,1].
double ssim(const Tensor& a, const Tensor& b, int window = 7);

double rmse(const Tensor& a, const Tensor& b);

struct EvalResult {
    std::map<int, double> ap_per_category;
    std::map<int, double> corloc_per_category;
    double map = 0.0;
    double mean_corloc = 0.0;
    double mean_ssim = 0.0;  // filled by synthesis evaluations
    double mean_rmse = 0.0;
    ApCounts counts;  // pooled over categories at IoU 0.5

    std::string table() const;
    std::string key_values() const;
};

// Detection evaluation over a category -> per-image detections/gts mapping.
EvalResult evaluate_detections(const std::map<int, CategoryDetections>& per_category,
                               double iou_threshold = 0.5);

}  // namespace rankgan
