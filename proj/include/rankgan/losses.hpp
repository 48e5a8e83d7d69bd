#pragma once

#include <string>
#include <vector>

#include "rankgan/tensor.hpp"

namespace rankgan {

enum class TrainMode { supervised, weak };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);

struct LossCoeffs {
    double rank = 0.05;
    double img = 1e-6;
    double feat = 1e-5;
    double adv = 100.0;
    double margin = 0.0;  // hinge margin, 0 by default

    void validate() const;
};

// Per-step objective values plus the coefficients that combined them.
struct LossReport {
    TrainMode mode = TrainMode::supervised;
    double rank = 0.0, adv = 0.0, disc = 0.0, img = 0.0, feat = 0.0;
    double total = 0.0;
    double a_rank = 0.0, a_img = 0.0, a_feat = 0.0, a_adv = 0.0;
    bool rank_active = false, img_active = false, feat_active = false, adv_active = false;

    // Identical expression/order as the stored total, so equality is exact.
    double recompute_total() const;
    std::string log_line(std::uint64_t step) const;
};

// Cosine distance 1 - a.b/(|a||b|) in [0,2]. Near-zero-norm inputs yield the
// neutral distance 1 and set *degenerate.
Tensor cosine_distance(const Tensor& a, const Tensor& b, bool* degenerate = nullptr);
double cosine_distance(const std::vector<double>& a, const std::vector<double>& b,
                       bool* degenerate = nullptr);

// Hinge max{0, Dist(S,x+) - Dist(S,x-) + margin}.
Tensor ranking_loss(const Tensor& fs, const Tensor& fpos, const Tensor& fneg,
                    double margin = 0.0);
double ranking_loss(const std::vector<double>& fs, const std::vector<double>& fpos,
                    const std::vector<double>& fneg, double margin = 0.0);

// -sum[log D(x+) + log(1 - D(S))], log arguments floored at 1e-7.
Tensor discriminator_loss(const std::vector<Tensor>& real_scores,
                          const std::vector<Tensor>& fake_scores);
double discriminator_loss(const std::vector<double>& real_scores,
                          const std::vector<double>& fake_scores);

// -sum log D(S).
Tensor adversarial_loss(const std::vector<Tensor>& fake_scores);
double adversarial_loss(const std::vector<double>& fake_scores);

// Sum of squared pixel differences.
Tensor image_loss(const Tensor& s, const Tensor& xpos);

// Squared distance to the mean of the box features.
Tensor feature_loss(const Tensor& fs, const std::vector<Tensor>& box_features);

struct LossTerms {
    Tensor rank, img, feat, adv;  // undefined tensors mean the term is absent
    double disc = 0.0;            // reported only, never in the total
};

struct TotalLoss {
    Tensor value;
    LossReport report;
};

TotalLoss total_loss(const LossTerms& terms, const LossCoeffs& coeffs, TrainMode mode);

}  // namespace rankgan
