#include "rankgan/networks.hpp"

#include <cmath>

#include "rankgan/imageops.hpp"

namespace rankgan {

namespace {

Tensor glorot(Rng& rng, Shape shape, int fan_in, int fan_out, const std::string& name) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor::parameter(std::move(shape), std::move(v), name);
}

// Small random bias init keeps preactivations off the exact ReLU kink even
// in regions whose inputs are all zero.
Tensor bias_param(Rng& rng, Shape shape, const std::string& name) {
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = rng.uniform(-0.05, 0.05);
    return Tensor::parameter(std::move(shape), std::move(v), name);
}

Tensor conv_param(Rng& rng, int f, int c, int k, const std::string& name) {
    return glorot(rng, {f, c, k, k}, c * k * k, f * k * k, name);
}

Tensor tconv_param(Rng& rng, int cin, int cout, int k, const std::string& name) {
    return glorot(rng, {cin, cout, k, k}, cin * k * k, cout * k * k, name);
}

Tensor fc_param(Rng& rng, int m, int n, const std::string& name) {
    return glorot(rng, {m, n}, n, m, name);
}

// Parameter view selector: detached copies cut parameter gradients while the
// activations stay differentiable.
inline Tensor pv(const Tensor& p, bool param_grad) {
    return param_grad ? p : p.detached();
}

}  // namespace

void NetConfig::validate() const {
    if (in_channels != 1 && in_channels != 3)
        throw ConfigError("net: in_channels must be 1 or 3");
    if (scene_size % 4 != 0 || scene_size < 16)
        throw ConfigError("net: scene_size must be >= 16 and divisible by 4");
    if (patch_size % 8 != 0 || patch_size < 8)
        throw ConfigError("net: patch_size must be >= 8 and divisible by 8");
    if (patch_size > scene_size) throw ConfigError("net: patch_size exceeds scene_size");
    if (heat_res() % 2 != 0) throw ConfigError("net: heat resolution must be even");
    if (d_vis < 1 || d_loc < 1 || categories < 2) throw ConfigError("net: bad dimensions");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("net: dropout must lie in [0,1)");
}

// ---- EncoderNet ----

EncoderNet::EncoderNet(const NetConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    c1w_ = conv_param(rng, cfg.enc_c1, cfg.in_channels, 3, "encoder.conv1.w");
    c1b_ = bias_param(rng, {cfg.enc_c1}, "encoder.conv1.b");
    c2w_ = conv_param(rng, cfg.enc_c2, cfg.enc_c1, 3, "encoder.conv2.w");
    c2b_ = bias_param(rng, {cfg.enc_c2}, "encoder.conv2.b");
    c3w_ = conv_param(rng, cfg.enc_c3, cfg.enc_c2, 3, "encoder.conv3.w");
    c3b_ = bias_param(rng, {cfg.enc_c3}, "encoder.conv3.b");
    const int grid = cfg.scene_size / 4;
    const int code_in = cfg.flatten_code ? cfg.enc_c3 * grid * grid : cfg.enc_c3;
    fvw_ = fc_param(rng, cfg.d_vis, code_in, "encoder.fc_vis.w");
    fvb_ = bias_param(rng, {cfg.d_vis}, "encoder.fc_vis.b");
    fcw_ = fc_param(rng, cfg.categories, cfg.enc_c3, "encoder.fc_cls.w");
    fcb_ = bias_param(rng, {cfg.categories}, "encoder.fc_cls.b");
}

Tensor EncoderNet::conv_features(const Tensor& image, bool param_grad) const {
    if (image.shape().size() != 3 || image.dim(0) != cfg_.in_channels)
        throw DimensionError("encoder: expected [" + std::to_string(cfg_.in_channels) +
                             ",H,W] image, got " + shape_str(image.shape()));
    if (image.dim(1) % 4 != 0 || image.dim(2) % 4 != 0)
        throw DimensionError("encoder: image sides must be divisible by 4, got " +
                             shape_str(image.shape()));
    Tensor h = relu(bias_add_channel(conv2d(image, pv(c1w_, param_grad), 1, 1),
                                     pv(c1b_, param_grad)));
    h = max_pool(h, 2, 2);
    h = relu(bias_add_channel(conv2d(h, pv(c2w_, param_grad), 1, 1), pv(c2b_, param_grad)));
    h = max_pool(h, 2, 2);
    h = relu(bias_add_channel(conv2d(h, pv(c3w_, param_grad), 1, 1), pv(c3b_, param_grad)));
    return h;
}

Tensor EncoderNet::features(const Tensor& image, bool param_grad) const {
    if (image.dim(1) != cfg_.scene_size || image.dim(2) != cfg_.scene_size)
        throw DimensionError("encoder: features() expects a " +
                             std::to_string(cfg_.scene_size) + "px image, got " +
                             shape_str(image.shape()));
    Tensor feat = conv_features(image, param_grad);
    Tensor code = cfg_.flatten_code
                      ? reshape(feat, {static_cast<int>(feat.size())})
                      : global_avg_pool(feat);
    return fully_connected(code, pv(fvw_, param_grad), pv(fvb_, param_grad));
}

Tensor EncoderNet::features_any(const Tensor& image, bool param_grad) const {
    if (image.dim(1) == cfg_.scene_size && image.dim(2) == cfg_.scene_size)
        return features(image, param_grad);
    return features(upsample_bilinear(image, cfg_.scene_size, cfg_.scene_size), param_grad);
}

Tensor EncoderNet::class_logits(const Tensor& image, bool param_grad) const {
    Tensor pooled = global_avg_pool(conv_features(image, param_grad));
    return fully_connected(pooled, pv(fcw_, param_grad), pv(fcb_, param_grad));
}

HeatMap EncoderNet::cam_raw(const Tensor& image, int category) const {
    if (category < 0 || category >= cfg_.categories)
        throw LookupError("cam: unknown category " + std::to_string(category));
    Tensor feat = conv_features(image, /*param_grad=*/false);
    const int c = feat.dim(0), h = feat.dim(1), w = feat.dim(2);
    HeatMap map(h, w, HeatMap::Source::cam);
    const auto& wts = fcw_.values();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int ch = 0; ch < c; ++ch)
                acc += wts[static_cast<std::size_t>(category) * c + ch] *
                       feat[(static_cast<std::size_t>(ch) * h + y) * w + x];
            map.at(y, x) = acc > 0.0 ? acc : 0.0;
        }
    }
    map.normalize_max();
    return map;
}

std::vector<std::pair<std::string, Tensor>> EncoderNet::named_params() const {
    return {{"encoder.conv1.w", c1w_}, {"encoder.conv1.b", c1b_},
            {"encoder.conv2.w", c2w_}, {"encoder.conv2.b", c2b_},
            {"encoder.conv3.w", c3w_}, {"encoder.conv3.b", c3b_},
            {"encoder.fc_vis.w", fvw_}, {"encoder.fc_vis.b", fvb_},
            {"encoder.fc_cls.w", fcw_}, {"encoder.fc_cls.b", fcb_}};
}

std::vector<Tensor> EncoderNet::params() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

// ---- LocEncoderNet ----

LocEncoderNet::LocEncoderNet(const NetConfig& cfg, Rng& rng) : cfg_(cfg) {
    const int hr = cfg.heat_res();
    cw_ = conv_param(rng, cfg.loc_c1, 1, 3, "locenc.conv.w");
    cb_ = bias_param(rng, {cfg.loc_c1}, "locenc.conv.b");
    const int flat = cfg.loc_c1 * (hr / 2) * (hr / 2);
    fw_ = fc_param(rng, cfg.d_loc, flat, "locenc.fc.w");
    fb_ = bias_param(rng, {cfg.d_loc}, "locenc.fc.b");
}

Tensor LocEncoderNet::features(const HeatMap& map, bool param_grad) const {
    const int hr = cfg_.heat_res();
    if (map.height != hr || map.width != hr)
        throw DimensionError("locenc: expected " + std::to_string(hr) + "x" +
                             std::to_string(hr) + " map, got " + std::to_string(map.height) +
                             "x" + std::to_string(map.width));
    Tensor in = Tensor::constant({1, hr, hr}, map.scores);
    Tensor h = relu(bias_add_channel(conv2d(in, pv(cw_, param_grad), 1, 1), pv(cb_, param_grad)));
    h = max_pool(h, 2, 2);
    h = reshape(h, {static_cast<int>(h.size())});
    return fully_connected(h, pv(fw_, param_grad), pv(fb_, param_grad));
}

std::vector<std::pair<std::string, Tensor>> LocEncoderNet::named_params() const {
    return {{"locenc.conv.w", cw_}, {"locenc.conv.b", cb_},
            {"locenc.fc.w", fw_}, {"locenc.fc.b", fb_}};
}

std::vector<Tensor> LocEncoderNet::params() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

// ---- GeneratorNet ----

GeneratorNet::GeneratorNet(const NetConfig& cfg, Rng& rng) : cfg_(cfg) {
    const int latent = cfg.d_vis + cfg.d_loc;
    const int s = cfg.patch_size / 8;
    f1w_ = fc_param(rng, cfg.gen_fc1, latent, "gen.fc1.w");
    f1b_ = bias_param(rng, {cfg.gen_fc1}, "gen.fc1.b");
    f2w_ = fc_param(rng, cfg.gen_c0 * s * s, cfg.gen_fc1, "gen.fc2.w");
    f2b_ = bias_param(rng, {cfg.gen_c0 * s * s}, "gen.fc2.b");
    u1w_ = tconv_param(rng, cfg.gen_c0, cfg.gen_c1, 4, "gen.up1.w");
    u1b_ = bias_param(rng, {cfg.gen_c1}, "gen.up1.b");
    k1w_ = conv_param(rng, cfg.gen_c1, cfg.gen_c1, 3, "gen.conv1.w");
    k1b_ = bias_param(rng, {cfg.gen_c1}, "gen.conv1.b");
    u2w_ = tconv_param(rng, cfg.gen_c1, cfg.gen_c2, 4, "gen.up2.w");
    u2b_ = bias_param(rng, {cfg.gen_c2}, "gen.up2.b");
    k2w_ = conv_param(rng, cfg.gen_c2, cfg.gen_c2, 3, "gen.conv2.w");
    k2b_ = bias_param(rng, {cfg.gen_c2}, "gen.conv2.b");
    u3w_ = tconv_param(rng, cfg.gen_c2, cfg.in_channels, 4, "gen.up3.w");
    u3b_ = bias_param(rng, {cfg.in_channels}, "gen.up3.b");
}

Tensor GeneratorNet::forward(const Tensor& latent, bool param_grad) const {
    const int expect = cfg_.d_vis + cfg_.d_loc;
    if (latent.shape() != Shape{expect})
        throw DimensionError("generator: latent must have length " + std::to_string(expect) +
                             ", got " + shape_str(latent.shape()));
    const int s = cfg_.patch_size / 8;
    Tensor h = relu(fully_connected(latent, pv(f1w_, param_grad), pv(f1b_, param_grad)));
    h = relu(fully_connected(h, pv(f2w_, param_grad), pv(f2b_, param_grad)));
    h = reshape(h, {cfg_.gen_c0, s, s});
    h = relu(bias_add_channel(transposed_conv2d(h, pv(u1w_, param_grad), 2, 1),
                              pv(u1b_, param_grad)));
    h = relu(bias_add_channel(conv2d(h, pv(k1w_, param_grad), 1, 1), pv(k1b_, param_grad)));
    h = relu(bias_add_channel(transposed_conv2d(h, pv(u2w_, param_grad), 2, 1),
                              pv(u2b_, param_grad)));
    h = relu(bias_add_channel(conv2d(h, pv(k2w_, param_grad), 1, 1), pv(k2b_, param_grad)));
    h = bias_add_channel(transposed_conv2d(h, pv(u3w_, param_grad), 2, 1), pv(u3b_, param_grad));
    return sigmoid(h);
}

std::vector<std::pair<std::string, Tensor>> GeneratorNet::named_params() const {
    return {{"gen.fc1.w", f1w_}, {"gen.fc1.b", f1b_}, {"gen.fc2.w", f2w_}, {"gen.fc2.b", f2b_},
            {"gen.up1.w", u1w_}, {"gen.up1.b", u1b_}, {"gen.conv1.w", k1w_},
            {"gen.conv1.b", k1b_}, {"gen.up2.w", u2w_}, {"gen.up2.b", u2b_},
            {"gen.conv2.w", k2w_}, {"gen.conv2.b", k2b_}, {"gen.up3.w", u3w_},
            {"gen.up3.b", u3b_}};
}

std::vector<Tensor> GeneratorNet::params() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

// ---- DiscriminatorNet ----

DiscriminatorNet::DiscriminatorNet(const NetConfig& cfg, Rng& rng) : cfg_(cfg) {
    const int in_ch = cfg.in_channels + (cfg.conditional_disc ? 1 : 0);
    c1w_ = conv_param(rng, cfg.disc_c1, in_ch, 3, "disc.conv1.w");
    c1b_ = bias_param(rng, {cfg.disc_c1}, "disc.conv1.b");
    c2w_ = conv_param(rng, cfg.disc_c2, cfg.disc_c1, 3, "disc.conv2.w");
    c2b_ = bias_param(rng, {cfg.disc_c2}, "disc.conv2.b");
    c3w_ = conv_param(rng, cfg.disc_c3, cfg.disc_c2, 3, "disc.conv3.w");
    c3b_ = bias_param(rng, {cfg.disc_c3}, "disc.conv3.b");
    f1w_ = fc_param(rng, cfg.disc_fc, cfg.disc_c3, "disc.fc1.w");
    f1b_ = bias_param(rng, {cfg.disc_fc}, "disc.fc1.b");
    f2w_ = fc_param(rng, 2, cfg.disc_fc, "disc.fc2.w");
    f2b_ = bias_param(rng, {2}, "disc.fc2.b");
}

Tensor DiscriminatorNet::forward(const Tensor& image, Rng& dropout_rng, bool training,
                                 bool param_grad) const {
    const int in_ch = cfg_.in_channels + (cfg_.conditional_disc ? 1 : 0);
    if (image.shape().size() != 3 || image.dim(0) != in_ch ||
        image.dim(1) != cfg_.patch_size || image.dim(2) != cfg_.patch_size)
        throw DimensionError("discriminator: expected [" + std::to_string(in_ch) + "," +
                             std::to_string(cfg_.patch_size) + "," +
                             std::to_string(cfg_.patch_size) + "] input, got " +
                             shape_str(image.shape()));
    Tensor h = relu(bias_add_channel(conv2d(image, pv(c1w_, param_grad), 1, 1),
                                     pv(c1b_, param_grad)));
    h = max_pool(h, 2, 2);
    h = relu(bias_add_channel(conv2d(h, pv(c2w_, param_grad), 1, 1), pv(c2b_, param_grad)));
    h = max_pool(h, 2, 2);
    h = relu(bias_add_channel(conv2d(h, pv(c3w_, param_grad), 1, 1), pv(c3b_, param_grad)));
    Tensor pooled = global_avg_pool(h);
    pooled = dropout(pooled, cfg_.dropout_p, dropout_rng, training);
    Tensor f = relu(fully_connected(pooled, pv(f1w_, param_grad), pv(f1b_, param_grad)));
    Tensor logits = fully_connected(f, pv(f2w_, param_grad), pv(f2b_, param_grad));
    return softmax(logits, 0);
}

std::vector<std::pair<std::string, Tensor>> DiscriminatorNet::named_params() const {
    return {{"disc.conv1.w", c1w_}, {"disc.conv1.b", c1b_}, {"disc.conv2.w", c2w_},
            {"disc.conv2.b", c2b_}, {"disc.conv3.w", c3w_}, {"disc.conv3.b", c3b_},
            {"disc.fc1.w", f1w_}, {"disc.fc1.b", f1b_}, {"disc.fc2.w", f2w_},
            {"disc.fc2.b", f2b_}};
}

std::vector<Tensor> DiscriminatorNet::params() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
}

// ---- Networks ----

Networks Networks::init(const NetConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Networks nets;
    nets.cfg = cfg;
    Rng rng(Rng::mix(seed, 0x1217));
    nets.encoder = EncoderNet(cfg, rng);
    nets.locenc = LocEncoderNet(cfg, rng);
    nets.generator = GeneratorNet(cfg, rng);
    nets.discriminator = DiscriminatorNet(cfg, rng);
    return nets;
}

std::vector<std::pair<std::string, Tensor>> Networks::named_params() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (auto& e : encoder.named_params()) out.push_back(e);
    for (auto& e : locenc.named_params()) out.push_back(e);
    for (auto& e : generator.named_params()) out.push_back(e);
    for (auto& e : discriminator.named_params()) out.push_back(e);
    return out;
}

std::vector<Tensor> Networks::eg_params() const {
    std::vector<Tensor> out;
    for (auto& t : encoder.params()) out.push_back(t);
    for (auto& t : locenc.params()) out.push_back(t);
    for (auto& t : generator.params()) out.push_back(t);
    return out;
}

std::vector<Tensor> Networks::disc_params() const { return discriminator.params(); }

std::vector<Tensor> Networks::all_params() const {
    auto out = eg_params();
    for (auto& t : disc_params()) out.push_back(t);
    return out;
}

// ---- spec-level ops ----

Tensor encode_image(const EncoderNet& enc, const Tensor& image, bool param_grad) {
    return enc.features(image, param_grad);
}

HeatMap class_activation_map(const EncoderNet& enc, const Tensor& image, int category) {
    HeatMap raw = enc.cam_raw(image, category);
    HeatMap up = resize_heatmap(raw, image.dim(1), image.dim(2));
    for (double& s : up.scores) s = s > 0.0 ? s : 0.0;
    up.normalize_max();
    return up;
}

Tensor encode_location(const LocEncoderNet& loc, const HeatMap& map, int expected_res,
                       bool param_grad) {
    if (map.height != expected_res || map.width != expected_res)
        throw DimensionError("encode_location: map resolution " + std::to_string(map.height) +
                             "x" + std::to_string(map.width) + " does not match expected " +
                             std::to_string(expected_res));
    return loc.features(map, param_grad);
}

Tensor build_latent(const Tensor& visual, const Tensor& location) {
    return concat(visual, location);
}

Tensor generate(const GeneratorNet& gen, const Tensor& latent, bool param_grad) {
    return gen.forward(latent, param_grad);
}

Tensor discriminate(const DiscriminatorNet& disc, const Tensor& image, Rng& rng,
                    bool training, bool param_grad) {
    Tensor pair = disc.forward(image, rng, training, param_grad);
    return clamp(at_index(pair, 1), 1e-7, 1.0 - 1e-7);  // P(real)
}

Tensor classification_loss(const EncoderNet& enc, const Tensor& image, int label) {
    Tensor probs = softmax(enc.class_logits(image), 0);
    return neg(log_floor(at_index(probs, static_cast<std::size_t>(label)), 1e-12));
}

}  // namespace rankgan
