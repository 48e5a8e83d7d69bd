#pragma once

// Gradient-check suites shared by the unit tests and the acceptance runner.

#include <vector>

#include "oracles.hpp"
#include "rankgan/imageops.hpp"
#include "rankgan/networks.hpp"
#include "rankgan/rng.hpp"
#include "rankgan/tensor.hpp"

namespace gradsuite {

using namespace rankgan;

inline std::vector<double> rand_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Values kept away from ReLU kinks and with pairwise-distinct magnitudes so
// max-pool argmaxes cannot flip under the h = 1e-4 perturbation.
inline std::vector<double> rand_vec_safe(Rng& rng, std::size_t n) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i-- > 1;)
        std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i) + 1))]);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double mag = 0.05 + 0.9 * static_cast<double>(perm[i] + 1) / static_cast<double>(n + 1);
        v[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * mag;
    }
    return v;
}

// Max relative error across one gradient check of every layer kind.
inline double layer_kinds_max_error(std::uint64_t seed) {
    Rng rng(Rng::mix(seed, 0x6ead));
    double worst = 0.0;
    auto track = [&](double e) { worst = std::max(worst, e); };

    {  // relu
        Tensor x = Tensor::parameter({12}, rand_vec_safe(rng, 12), "x");
        Tensor w = Tensor::constant({12}, rand_vec(rng, 12));
        track(oracles::gradient_check([&] { return dot(relu(x), w); }, {x}));
    }
    {  // sigmoid
        Tensor x = Tensor::parameter({12}, rand_vec(rng, 12, -2.0, 2.0), "x");
        Tensor w = Tensor::constant({12}, rand_vec(rng, 12));
        track(oracles::gradient_check([&] { return dot(sigmoid(x), w); }, {x}));
    }
    {  // softmax
        Tensor x = Tensor::parameter({8}, rand_vec(rng, 8, -2.0, 2.0), "x");
        Tensor w = Tensor::constant({8}, rand_vec(rng, 8));
        track(oracles::gradient_check([&] { return dot(softmax(x, 0), w); }, {x}));
    }
    {  // max_pool
        Tensor x = Tensor::parameter({2, 4, 4}, rand_vec_safe(rng, 32), "x");
        Tensor w = Tensor::constant({8}, rand_vec(rng, 8));
        track(oracles::gradient_check(
            [&] { return dot(reshape(max_pool(x, 2, 2), {8}), w); }, {x}));
    }
    {  // global_avg_pool
        Tensor x = Tensor::parameter({3, 3, 3}, rand_vec(rng, 27), "x");
        Tensor w = Tensor::constant({3}, rand_vec(rng, 3));
        track(oracles::gradient_check([&] { return dot(global_avg_pool(x), w); }, {x}));
    }
    {  // fully_connected
        Tensor x = Tensor::parameter({5}, rand_vec(rng, 5), "x");
        Tensor w = Tensor::parameter({4, 5}, rand_vec(rng, 20), "w");
        Tensor b = Tensor::parameter({4}, rand_vec(rng, 4), "b");
        track(oracles::gradient_check(
            [&] { return sum(square(fully_connected(x, w, b))); }, {x, w, b}));
    }
    {  // dropout (fixed mask via a fixed-seed stream per forward)
        Tensor x = Tensor::parameter({16}, rand_vec(rng, 16), "x");
        Tensor w = Tensor::constant({16}, rand_vec(rng, 16));
        const std::uint64_t mask_seed = rng.next();
        track(oracles::gradient_check(
            [&] {
                Rng mask_rng(mask_seed);
                return dot(dropout(x, 0.5, mask_rng, true), w);
            },
            {x}));
    }
    {  // l2_norm
        Tensor x = Tensor::parameter({9}, rand_vec_safe(rng, 9), "x");
        Tensor w = Tensor::constant({9}, rand_vec(rng, 9));
        track(oracles::gradient_check([&] { return dot(l2_normalize(x), w); }, {x}));
    }
    {  // conv2d (stride 2, pad 1) w.r.t. input and kernels
        Tensor x = Tensor::parameter({2, 5, 5}, rand_vec(rng, 50), "x");
        Tensor k = Tensor::parameter({3, 2, 3, 3}, rand_vec(rng, 54), "k");
        track(oracles::gradient_check(
            [&] { return sum(square(conv2d(x, k, 2, 1))); }, {x, k}));
    }
    {  // bilinear upsample
        Tensor x = Tensor::parameter({2, 3, 3}, rand_vec(rng, 18), "x");
        Tensor w = Tensor::constant({2 * 7 * 7}, rand_vec(rng, 98));
        track(oracles::gradient_check(
            [&] { return dot(reshape(upsample_bilinear(x, 7, 7), {98}), w); }, {x}));
    }
    {  // transposed_conv2d (stride 2, pad 1)
        Tensor x = Tensor::parameter({3, 3, 3}, rand_vec(rng, 27), "x");
        Tensor k = Tensor::parameter({3, 2, 4, 4}, rand_vec(rng, 96), "k");
        track(oracles::gradient_check(
            [&] { return sum(square(transposed_conv2d(x, k, 2, 1))); }, {x, k}));
    }
    return worst;
}

inline NetConfig tiny_net_config() {
    NetConfig cfg;
    cfg.in_channels = 1;
    cfg.scene_size = 16;
    cfg.patch_size = 8;
    cfg.categories = 3;
    cfg.d_vis = 6;
    cfg.d_loc = 3;
    cfg.enc_c1 = 2;
    cfg.enc_c2 = 3;
    cfg.enc_c3 = 4;
    cfg.loc_c1 = 2;
    cfg.gen_fc1 = 8;
    cfg.gen_c0 = 4;
    cfg.gen_c1 = 3;
    cfg.gen_c2 = 2;
    cfg.disc_c1 = 2;
    cfg.disc_c2 = 3;
    cfg.disc_c3 = 4;
    cfg.disc_fc = 4;
    return cfg;
}

// End-to-end check of generate(build_latent(encode_image, encode_location))
// against central differences, over every network parameter.
inline double composed_map_max_error(std::uint64_t seed) {
    NetConfig cfg = tiny_net_config();
    Networks nets = Networks::init(cfg, seed);
    Rng rng(Rng::mix(seed, 0xc0de));
    Tensor image = Tensor::constant({1, cfg.scene_size, cfg.scene_size},
                                    rand_vec(rng, static_cast<std::size_t>(cfg.scene_size) *
                                                      cfg.scene_size, 0.0, 1.0));
    HeatMap heat(cfg.heat_res(), cfg.heat_res());
    for (auto& s : heat.scores) s = rng.uniform();
    Tensor target = Tensor::constant({1, cfg.patch_size, cfg.patch_size},
                                     rand_vec(rng, static_cast<std::size_t>(cfg.patch_size) *
                                                       cfg.patch_size, 0.0, 1.0));

    auto forward = [&] {
        Tensor vis = encode_image(nets.encoder, image);
        Tensor loc = encode_location(nets.locenc, heat, cfg.heat_res());
        Tensor s = generate(nets.generator, build_latent(vis, loc));
        return sum(square(sub(s, target)));
    };
    std::vector<Tensor> params;
    for (auto& t : nets.encoder.params()) params.push_back(t);
    for (auto& t : nets.locenc.params()) params.push_back(t);
    for (auto& t : nets.generator.params()) params.push_back(t);
    return oracles::gradient_check(forward, params, 1e-4, 7);
}

}  // namespace gradsuite
