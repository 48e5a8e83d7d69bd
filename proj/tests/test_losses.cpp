#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "loss_examples.hpp"
#include "oracles.hpp"
#include "rankgan/losses.hpp"

using namespace rankgan;

TEST_CASE("closed-form objective values") {
    auto out = loss_examples::run_closed_form_cases();
    for (const auto& f : out.failures) MESSAGE(f);
    CHECK(out.failures.empty());
}

TEST_CASE("ranking loss is scale invariant over 100 random triples") {
    auto out = loss_examples::run_scale_invariance(100);
    for (const auto& f : out.failures) MESSAGE(f);
    CHECK(out.failures.empty());
}

TEST_CASE("at most one hinge orientation is strictly positive") {
    Rng rng(41);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> fs(4), fp(4), fn(4);
        for (auto& v : fs) v = rng.uniform(-1.0, 1.0);
        for (auto& v : fp) v = rng.uniform(-1.0, 1.0);
        for (auto& v : fn) v = rng.uniform(-1.0, 1.0);
        const double fwd = ranking_loss(fs, fp, fn);
        const double swapped = ranking_loss(fs, fn, fp);
        CHECK(!(fwd > 0.0 && swapped > 0.0));
        CHECK(fwd >= 0.0);
        CHECK(swapped >= 0.0);
    }
}

TEST_CASE("discriminator and adversarial losses pull D(S) in opposite directions") {
    Rng rng(43);
    for (int t = 0; t < 50; ++t) {
        const double ds = rng.uniform(1e-3, 1.0 - 1e-3);
        Tensor f = Tensor::parameter({1}, {ds}, "ds");
        Tensor real = Tensor::constant({1}, {0.7});
        backward(discriminator_loss({real}, {f}));
        const double g_disc = f.grad()[0];
        f.zero_grad();
        backward(adversarial_loss({f}));
        const double g_adv = f.grad()[0];
        CHECK(g_disc > 0.0);
        CHECK(g_adv < 0.0);
    }
}

TEST_CASE("cosine distance stays within [0,2] and flags degeneracy") {
    Rng rng(47);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> a(3), b(3);
        for (auto& v : a) v = rng.uniform(-5.0, 5.0);
        for (auto& v : b) v = rng.uniform(-5.0, 5.0);
        const double d = cosine_distance(a, b);
        CHECK(d >= 0.0);
        CHECK(d <= 2.0);
    }
    bool degenerate = false;
    CHECK(cosine_distance({0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, &degenerate) == 1.0);
    CHECK(degenerate);
}

TEST_CASE("score domain errors") {
    CHECK_THROWS_AS(discriminator_loss(std::vector<double>{1.5}, std::vector<double>{0.5}),
                    DomainError);
    CHECK_THROWS_AS(discriminator_loss(std::vector<double>{0.5}, std::vector<double>{0.0}),
                    DomainError);
    CHECK_THROWS_AS(adversarial_loss(std::vector<double>{-0.2}), DomainError);
    CHECK_THROWS_AS(feature_loss(Tensor::constant({2}, {0.0, 0.0}), {}), ParameterError);
}

TEST_CASE("negative coefficients are a config error") {
    LossCoeffs bad;
    bad.adv = -1.0;
    LossTerms terms;
    terms.rank = Tensor::scalar(1.0);
    CHECK_THROWS_AS(total_loss(terms, bad, TrainMode::supervised), ConfigError);
}

TEST_CASE("loss report totals reproduce exactly from stored terms") {
    Rng rng(53);
    for (int t = 0; t < 100; ++t) {
        LossTerms terms;
        if (rng.uniform() < 0.8) terms.rank = Tensor::scalar(rng.uniform(0.0, 3.0));
        if (rng.uniform() < 0.8) terms.img = Tensor::scalar(rng.uniform(0.0, 30.0));
        if (rng.uniform() < 0.8) terms.feat = Tensor::scalar(rng.uniform(0.0, 30.0));
        if (rng.uniform() < 0.8) terms.adv = Tensor::scalar(rng.uniform(0.0, 10.0));
        const TrainMode mode = rng.uniform() < 0.5 ? TrainMode::supervised : TrainMode::weak;
        TotalLoss tl = total_loss(terms, LossCoeffs{}, mode);
        CHECK(tl.report.recompute_total() == tl.report.total);
        CHECK(std::abs(tl.value.value() - tl.report.total) <= 1e-12);
        CHECK(tl.report.rank >= 0.0);
        CHECK(tl.report.img >= 0.0);
        CHECK(tl.report.feat >= 0.0);
        CHECK(tl.report.adv >= 0.0);
        CHECK(tl.report.disc >= 0.0);
    }
}

TEST_CASE("loss terms differentiate cleanly through their tensors") {
    Rng rng(59);
    Tensor fs = Tensor::parameter({6}, {0.3, -0.4, 0.8, 0.1, -0.9, 0.5}, "fs");
    Tensor fp = Tensor::constant({6}, {0.2, -0.1, 0.7, 0.3, -0.5, 0.4});
    Tensor fn = Tensor::constant({6}, {-0.6, 0.9, -0.2, 0.8, 0.1, -0.3});
    CHECK(oracles::gradient_check([&] { return ranking_loss(fs, fp, fn); }, {fs}) <= 1e-3);

    Tensor s = Tensor::parameter({1, 4, 4}, std::vector<double>(16, 0.4), "s");
    Tensor x = Tensor::constant({1, 4, 4}, std::vector<double>(16, 0.6));
    CHECK(oracles::gradient_check([&] { return image_loss(s, x); }, {s}) <= 1e-3);

    Tensor fsf = Tensor::parameter({4}, {0.1, 0.4, -0.2, 0.9}, "fsf");
    std::vector<Tensor> boxes;
    for (int i = 0; i < 5; ++i) {
        std::vector<double> v(4);
        for (auto& e : v) e = rng.uniform(-1.0, 1.0);
        boxes.push_back(Tensor::constant({4}, v));
    }
    CHECK(oracles::gradient_check([&] { return feature_loss(fsf, boxes); }, {fsf}) <= 1e-3);
}

TEST_CASE("log line carries every term") {
    LossTerms terms;
    terms.rank = Tensor::scalar(0.5);
    terms.adv = Tensor::scalar(0.25);
    TotalLoss tl = total_loss(terms, LossCoeffs{}, TrainMode::supervised);
    const std::string line = tl.report.log_line(12);
    CHECK(line.find("12 supervised") == 0);
    CHECK(line.find("rank=") != std::string::npos);
    CHECK(line.find("total=") != std::string::npos);
}
