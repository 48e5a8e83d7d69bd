#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rankgan/heatmap.hpp"
#include "rankgan/rng.hpp"
#include "rankgan/tensor.hpp"

namespace rankgan {

struct NetConfig {
    int in_channels = 1;
    int scene_size = 32;
    int patch_size = 16;
    int categories = 5;
    int d_vis = 128;
    int d_loc = 16;
    int enc_c1 = 4, enc_c2 = 8, enc_c3 = 16;
    int loc_c1 = 4;
    int gen_fc1 = 96;
    int gen_c0 = 24, gen_c1 = 16, gen_c2 = 8;
    int disc_c1 = 4, disc_c2 = 8, disc_c3 = 16, disc_fc = 16;
    double dropout_p = 0.5;
    bool conditional_disc = false;
    // Visual-code form: FC over the flattened conv grid, or over the
    // GAP-pooled channels (a lossier code).
    bool flatten_code = false;

    int heat_res() const { return scene_size / 4; }  // CAM / location-map resolution
    void validate() const;
};

// Conv stack shared between scene encoding and patch ranking (identical
// weights by construction), with a GAP classification head that yields the
// class activation maps.
class EncoderNet {
public:
    EncoderNet() = default;
    EncoderNet(const NetConfig& cfg, Rng& rng);

    Tensor conv_features(const Tensor& image, bool param_grad = true) const;
    // Visual code: FC over the flattened conv grid (input at scene size).
    Tensor features(const Tensor& image, bool param_grad = true) const;
    // Same feature for patch-sized inputs, upsampled to the encoder input.
    Tensor features_any(const Tensor& image, bool param_grad = true) const;
    Tensor class_logits(const Tensor& image, bool param_grad = true) const;

    // Raw class activation map at conv resolution (h/4 x w/4), rectified and
    // peak-normalized.
    HeatMap cam_raw(const Tensor& image, int category) const;

    std::vector<std::pair<std::string, Tensor>> named_params() const;
    std::vector<Tensor> params() const;

private:
    NetConfig cfg_;
    Tensor c1w_, c1b_, c2w_, c2b_, c3w_, c3b_;
    Tensor fvw_, fvb_;  // visual feature head
    Tensor fcw_, fcb_;  // classification head (GAP)
};

class LocEncoderNet {
public:
    LocEncoderNet() = default;
    LocEncoderNet(const NetConfig& cfg, Rng& rng);

    Tensor features(const HeatMap& map, bool param_grad = true) const;  // length d_loc

    std::vector<std::pair<std::string, Tensor>> named_params() const;
    std::vector<Tensor> params() const;

private:
    NetConfig cfg_;
    Tensor cw_, cb_, fw_, fb_;
};

class GeneratorNet {
public:
    GeneratorNet() = default;
    GeneratorNet(const NetConfig& cfg, Rng& rng);

    Tensor forward(const Tensor& latent, bool param_grad = true) const;  // [C,patch,patch]

    std::vector<std::pair<std::string, Tensor>> named_params() const;
    std::vector<Tensor> params() const;

private:
    NetConfig cfg_;
    Tensor f1w_, f1b_, f2w_, f2b_;
    Tensor u1w_, u1b_, k1w_, k1b_;
    Tensor u2w_, u2b_, k2w_, k2b_;
    Tensor u3w_, u3b_;
};

class DiscriminatorNet {
public:
    DiscriminatorNet() = default;
    DiscriminatorNet(const NetConfig& cfg, Rng& rng);

    // Softmax pair [P(fake), P(real)].
    Tensor forward(const Tensor& image, Rng& dropout_rng, bool training,
                   bool param_grad = true) const;

    std::vector<std::pair<std::string, Tensor>> named_params() const;
    std::vector<Tensor> params() const;

private:
    NetConfig cfg_;
    Tensor c1w_, c1b_, c2w_, c2b_, c3w_, c3b_;
    Tensor f1w_, f1b_, f2w_, f2b_;
};

// The five networks; ranking aliases the encoder (single parameter storage).
struct Networks {
    NetConfig cfg;
    EncoderNet encoder;
    LocEncoderNet locenc;
    GeneratorNet generator;
    DiscriminatorNet discriminator;

    const EncoderNet& ranking() const { return encoder; }

    static Networks init(const NetConfig& cfg, std::uint64_t seed);

    std::vector<std::pair<std::string, Tensor>> named_params() const;
    std::vector<Tensor> eg_params() const;   // encoder + locenc + generator
    std::vector<Tensor> disc_params() const;
    std::vector<Tensor> all_params() const;
};

// Spec-level operations.
Tensor encode_image(const EncoderNet& enc, const Tensor& image, bool param_grad = true);
HeatMap class_activation_map(const EncoderNet& enc, const Tensor& image, int category);
Tensor encode_location(const LocEncoderNet& loc, const HeatMap& map, int expected_res,
                       bool param_grad = true);
Tensor build_latent(const Tensor& visual, const Tensor& location);
Tensor generate(const GeneratorNet& gen, const Tensor& latent, bool param_grad = true);
Tensor discriminate(const DiscriminatorNet& disc, const Tensor& image, Rng& rng,
                    bool training, bool param_grad = true);

// Cross-entropy over bank categories, used to pretrain the encoder's GAP head.
Tensor classification_loss(const EncoderNet& enc, const Tensor& image, int label);

}  // namespace rankgan
