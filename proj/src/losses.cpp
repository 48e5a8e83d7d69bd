#include "rankgan/losses.hpp"

#include <cmath>
#include <cstdio>

namespace rankgan {

namespace {

constexpr double kNormEps = 1e-12;
constexpr double kLogFloor = 1e-7;

void check_score_domain(double s, const char* what) {
    if (!(s > 0.0 && s < 1.0))
        throw DomainError(std::string(what) + ": score " + std::to_string(s) +
                          " outside (0,1)");
}

}  // namespace

std::string to_string(TrainMode mode) {
    return mode == TrainMode::supervised ? "supervised" : "weak";
}

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "supervised") return TrainMode::supervised;
    if (s == "weak") return TrainMode::weak;
    throw ConfigError("unknown training mode '" + s + "'");
}

void LossCoeffs::validate() const {
    if (rank < 0.0 || img < 0.0 || feat < 0.0 || adv < 0.0)
        throw ConfigError("loss coefficients must be non-negative");
    if (margin < 0.0) throw ConfigError("ranking margin must be non-negative");
}

double LossReport::recompute_total() const {
    double t = 0.0;
    if (rank_active) t += a_rank * rank;
    if (mode == TrainMode::supervised) {
        if (img_active) t += a_img * img;
    } else {
        if (feat_active) t += a_feat * feat;
    }
    if (adv_active) t += a_adv * adv;
    return t;
}

std::string LossReport::log_line(std::uint64_t step) const {
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "%llu %s rank=%.9e adv=%.9e disc=%.9e img=%.9e feat=%.9e total=%.9e",
                  static_cast<unsigned long long>(step), to_string(mode).c_str(), rank, adv,
                  disc, img, feat, total);
    return buf;
}

Tensor cosine_distance(const Tensor& a, const Tensor& b, bool* degenerate) {
    if (a.shape() != b.shape())
        throw DimensionError("cosine_distance: shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    double na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) na += a[i] * a[i];
    for (std::size_t i = 0; i < b.size(); ++i) nb += b[i] * b[i];
    if (degenerate) *degenerate = false;
    if (std::sqrt(na) < kNormEps || std::sqrt(nb) < kNormEps) {
        if (degenerate) *degenerate = true;
        return Tensor::scalar(1.0);  // neutral distance for a zero-norm feature
    }
    Tensor norm_a = sqrt_floor(sum(square(a)), 0.0);
    Tensor norm_b = sqrt_floor(sum(square(b)), 0.0);
    Tensor cos = clamp(div(dot(a, b), mul(norm_a, norm_b)), -1.0, 1.0);
    return add_scalar(neg(cos), 1.0);
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b,
                       bool* degenerate) {
    Tensor ta = Tensor::constant({static_cast<int>(a.size())}, a);
    Tensor tb = Tensor::constant({static_cast<int>(b.size())}, b);
    return cosine_distance(ta, tb, degenerate).value();
}

Tensor ranking_loss(const Tensor& fs, const Tensor& fpos, const Tensor& fneg, double margin) {
    Tensor dpos = cosine_distance(fs, fpos);
    Tensor dneg = cosine_distance(fs, fneg);
    Tensor gap = sub(dpos, dneg);
    if (margin != 0.0) gap = add_scalar(gap, margin);
    return relu(gap);
}

double ranking_loss(const std::vector<double>& fs, const std::vector<double>& fpos,
                    const std::vector<double>& fneg, double margin) {
    Tensor ts = Tensor::constant({static_cast<int>(fs.size())}, fs);
    Tensor tp = Tensor::constant({static_cast<int>(fpos.size())}, fpos);
    Tensor tn = Tensor::constant({static_cast<int>(fneg.size())}, fneg);
    return ranking_loss(ts, tp, tn, margin).value();
}

Tensor discriminator_loss(const std::vector<Tensor>& real_scores,
                          const std::vector<Tensor>& fake_scores) {
    if (real_scores.empty() && fake_scores.empty())
        throw ParameterError("discriminator_loss: no scores");
    Tensor acc = Tensor::scalar(0.0);
    for (const Tensor& r : real_scores) {
        check_score_domain(r.value(), "discriminator_loss");
        acc = add(acc, log_floor(r, kLogFloor));
    }
    for (const Tensor& f : fake_scores) {
        check_score_domain(f.value(), "discriminator_loss");
        acc = add(acc, log_floor(add_scalar(neg(f), 1.0), kLogFloor));
    }
    return neg(acc);
}

double discriminator_loss(const std::vector<double>& real_scores,
                          const std::vector<double>& fake_scores) {
    std::vector<Tensor> r, f;
    for (double s : real_scores) r.push_back(Tensor::scalar(s));
    for (double s : fake_scores) f.push_back(Tensor::scalar(s));
    return discriminator_loss(r, f).value();
}

Tensor adversarial_loss(const std::vector<Tensor>& fake_scores) {
    if (fake_scores.empty()) throw ParameterError("adversarial_loss: no scores");
    Tensor acc = Tensor::scalar(0.0);
    for (const Tensor& f : fake_scores) {
        check_score_domain(f.value(), "adversarial_loss");
        acc = add(acc, log_floor(f, kLogFloor));
    }
    return neg(acc);
}

double adversarial_loss(const std::vector<double>& fake_scores) {
    std::vector<Tensor> f;
    for (double s : fake_scores) f.push_back(Tensor::scalar(s));
    return adversarial_loss(f).value();
}

Tensor image_loss(const Tensor& s, const Tensor& xpos) {
    if (s.shape() != xpos.shape())
        throw DimensionError("image_loss: shape mismatch " + shape_str(s.shape()) + " vs " +
                             shape_str(xpos.shape()));
    return sum(square(sub(s, xpos)));
}

Tensor feature_loss(const Tensor& fs, const std::vector<Tensor>& box_features) {
    if (box_features.empty()) throw ParameterError("feature_loss: needs K >= 1 box features");
    Tensor avg = box_features[0];
    for (std::size_t i = 1; i < box_features.size(); ++i) avg = add(avg, box_features[i]);
    avg = scale(avg, 1.0 / static_cast<double>(box_features.size()));
    if (fs.shape() != avg.shape())
        throw DimensionError("feature_loss: feature length mismatch");
    return sum(square(sub(fs, avg)));
}

TotalLoss total_loss(const LossTerms& terms, const LossCoeffs& coeffs, TrainMode mode) {
    coeffs.validate();
    LossReport rep;
    rep.mode = mode;
    rep.a_rank = coeffs.rank;
    rep.a_img = coeffs.img;
    rep.a_feat = coeffs.feat;
    rep.a_adv = coeffs.adv;
    rep.disc = terms.disc;
    rep.rank_active = terms.rank.defined();
    rep.img_active = terms.img.defined();
    rep.feat_active = terms.feat.defined();
    rep.adv_active = terms.adv.defined();
    if (rep.rank_active) rep.rank = terms.rank.value();
    if (rep.img_active) rep.img = terms.img.value();
    if (rep.feat_active) rep.feat = terms.feat.value();
    if (rep.adv_active) rep.adv = terms.adv.value();

    // Graph total built in the same order recompute_total() uses.
    Tensor total = Tensor::scalar(0.0);
    if (rep.rank_active) total = add(total, scale(terms.rank, coeffs.rank));
    if (mode == TrainMode::supervised) {
        if (rep.img_active) total = add(total, scale(terms.img, coeffs.img));
    } else {
        if (rep.feat_active) total = add(total, scale(terms.feat, coeffs.feat));
    }
    if (rep.adv_active) total = add(total, scale(terms.adv, coeffs.adv));

    rep.total = rep.recompute_total();
    return {total, rep};
}

}  // namespace rankgan
