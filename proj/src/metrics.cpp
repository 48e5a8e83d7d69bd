#include "rankgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace rankgan {

double iou(const Box& a, const Box& b) {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

struct Flagged {
    double score;
    std::size_t image;
    Box box;
};

// Scores every detection as TP/FP against per-image ground truth, greedy in
// descending score order, each gt matched at most once.
std::vector<std::pair<double, bool>> match_detections(const CategoryDetections& d,
                                                      double thr, int* total_gt,
                                                      ApCounts* counts) {
    if (d.detections.size() != d.ground_truth.size())
        throw ParameterError("average_precision: detections/ground_truth image count mismatch");
    std::vector<Flagged> all;
    for (std::size_t i = 0; i < d.detections.size(); ++i)
        for (const Box& b : d.detections[i]) all.push_back({b.score, i, b});
    std::stable_sort(all.begin(), all.end(),
                     [](const Flagged& a, const Flagged& b) { return a.score > b.score; });

    int n_gt = 0;
    for (const auto& g : d.ground_truth) n_gt += static_cast<int>(g.size());
    if (total_gt) *total_gt = n_gt;

    std::vector<std::vector<bool>> used(d.ground_truth.size());
    for (std::size_t i = 0; i < used.size(); ++i)
        used[i].assign(d.ground_truth[i].size(), false);

    std::vector<std::pair<double, bool>> scored;  // (score, is_tp) in rank order
    int tp = 0;
    for (const Flagged& f : all) {
        const auto& gts = d.ground_truth[f.image];
        int best = -1;
        double best_iou = thr;  // strict: must exceed the threshold
        for (std::size_t j = 0; j < gts.size(); ++j) {
            if (used[f.image][j]) continue;
            const double v = iou(f.box, gts[j]);
            if (v > best_iou) {
                best_iou = v;
                best = static_cast<int>(j);
            }
        }
        if (best >= 0) {
            used[f.image][static_cast<std::size_t>(best)] = true;
            scored.emplace_back(f.score, true);
            ++tp;
        } else {
            scored.emplace_back(f.score, false);
        }
    }
    if (counts) {
        counts->tp = tp;
        counts->fp = static_cast<int>(scored.size()) - tp;
        counts->fn = n_gt - tp;
    }
    return scored;
}

}  // namespace

double average_precision(const CategoryDetections& d, double iou_threshold, ApCounts* counts) {
    int n_gt = 0;
    auto scored = match_detections(d, iou_threshold, &n_gt, counts);
    if (n_gt == 0) return 0.0;  // flagged by caller: detections without ground truth
    if (scored.empty()) return 0.0;

    // Precision/recall points in rank order, then the all-point interpolation:
    // integrate the running-max precision envelope over recall.
    const std::size_t n = scored.size();
    std::vector<double> precision(n), recall(n);
    int tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (scored[i].second) ++tp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
    }
    for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

double average_precision(const std::vector<Box>& detections, const std::vector<Box>& gts,
                         double iou_threshold) {
    CategoryDetections d;
    d.detections = {detections};
    d.ground_truth = {gts};
    return average_precision(d, iou_threshold, nullptr);
}

double corloc(const CategoryDetections& d, double iou_threshold) {
    if (d.detections.size() != d.ground_truth.size())
        throw ParameterError("corloc: detections/ground_truth image count mismatch");
    if (d.ground_truth.empty()) throw ParameterError("corloc: empty image set");
    int correct = 0;
    for (std::size_t i = 0; i < d.detections.size(); ++i) {
        if (d.ground_truth[i].empty())
            throw ParameterError("corloc: image without ground truth");
        if (d.detections[i].empty()) continue;
        const Box* top = &d.detections[i][0];
        for (const Box& b : d.detections[i])
            if (b.score > top->score) top = &b;
        for (const Box& g : d.ground_truth[i]) {
            if (iou(*top, g) > iou_threshold) {
                ++correct;
                break;
            }
        }
    }
    return static_cast<double>(correct) / static_cast<double>(d.ground_truth.size());
}

double ssim(const Tensor& a, const Tensor& b, int window) {
    if (a.shape() != b.shape())
        throw DimensionError("ssim: shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    if (a.shape().size() != 3) throw DimensionError("ssim: expects [C,H,W] images");
    const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
    const int win = std::min({window, h, w});
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    const double n = static_cast<double>(win) * win;

    double total = 0.0;
    int count = 0;
    for (int ch = 0; ch < c; ++ch) {
        const std::size_t base = static_cast<std::size_t>(ch) * h * w;
        for (int y = 0; y + win <= h; ++y) {
            for (int x = 0; x + win <= w; ++x) {
                double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
                for (int wy = 0; wy < win; ++wy) {
                    for (int wx = 0; wx < win; ++wx) {
                        const double va = a[base + static_cast<std::size_t>(y + wy) * w + x + wx];
                        const double vb = b[base + static_cast<std::size_t>(y + wy) * w + x + wx];
                        sa += va;
                        sb += vb;
                        saa += va * va;
                        sbb += vb * vb;
                        sab += va * vb;
                    }
                }
                const double mu_a = sa / n;
                const double mu_b = sb / n;
                const double var_a = saa / n - mu_a * mu_a;
                const double var_b = sbb / n - mu_b * mu_b;
                const double cov = sab / n - mu_a * mu_b;
                const double s = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                                 ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                total += s;
                ++count;
            }
        }
    }
    return count > 0 ? total / count : 1.0;
}

double rmse(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError("rmse: shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.size()));
}

EvalResult evaluate_detections(const std::map<int, CategoryDetections>& per_category,
                               double iou_threshold) {
    EvalResult r;
    for (const auto& [cat, d] : per_category) {
        ApCounts counts;
        r.ap_per_category[cat] = average_precision(d, iou_threshold, &counts);
        r.counts.tp += counts.tp;
        r.counts.fp += counts.fp;
        r.counts.fn += counts.fn;

        // CorLoc only over images that contain the category.
        CategoryDetections positives;
        for (std::size_t i = 0; i < d.ground_truth.size(); ++i) {
            if (d.ground_truth[i].empty()) continue;
            positives.detections.push_back(d.detections[i]);
            positives.ground_truth.push_back(d.ground_truth[i]);
        }
        r.corloc_per_category[cat] =
            positives.ground_truth.empty() ? 0.0 : corloc(positives, iou_threshold);
    }
    if (!r.ap_per_category.empty()) {
        double s = 0.0, sc = 0.0;
        for (const auto& [cat, ap] : r.ap_per_category) {
            s += ap;
            sc += r.corloc_per_category[cat];
        }
        r.map = s / static_cast<double>(r.ap_per_category.size());
        r.mean_corloc = sc / static_cast<double>(r.ap_per_category.size());
    }
    return r;
}

namespace {
std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}
}  // namespace

std::string EvalResult::table() const {
    std::string out;
    out += "category        AP    CorLoc\n";
    for (const auto& [cat, ap] : ap_per_category) {
        char line[96];
        std::snprintf(line, sizeof(line), "%8d  %8.4f  %8.4f\n", cat, ap,
                      corloc_per_category.at(cat));
        out += line;
    }
    char tail[160];
    std::snprintf(tail, sizeof(tail),
                  "mAP %.4f  CorLoc %.4f  TP %d  FP %d  FN %d\n", map, mean_corloc,
                  counts.tp, counts.fp, counts.fn);
    out += tail;
    return out;
}

std::string EvalResult::key_values() const {
    std::string out;
    for (const auto& [cat, ap] : ap_per_category)
        out += "ap." + std::to_string(cat) + " = " + fmt(ap) + "\n";
    for (const auto& [cat, cl] : corloc_per_category)
        out += "corloc." + std::to_string(cat) + " = " + fmt(cl) + "\n";
    out += "map = " + fmt(map) + "\n";
    out += "corloc = " + fmt(mean_corloc) + "\n";
    out += "ssim = " + fmt(mean_ssim) + "\n";
    out += "rmse = " + fmt(mean_rmse) + "\n";
    out += "tp = " + std::to_string(counts.tp) + "\n";
    out += "fp = " + std::to_string(counts.fp) + "\n";
    out += "fn = " + std::to_string(counts.fn) + "\n";
    return out;
}

}  // namespace rankgan
