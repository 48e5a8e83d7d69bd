#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "rankgan/adam.hpp"
#include "rankgan/discovery.hpp"
#include "rankgan/losses.hpp"
#include "rankgan/networks.hpp"
#include "rankgan/scenegen.hpp"

namespace rankgan {

struct TrainConfig {
    TrainMode mode = TrainMode::supervised;
    int batch = 16;
    int steps = 2000;
    int d_steps = 1;  // discriminator updates per generator update
    int k_top = 5;    // proposal count for the weak-mode feature loss
    std::uint64_t seed = 0;
    AdamConfig adam;
    LossCoeffs coeffs;
    bool use_rank = true;
    bool use_img = true;   // supervised mode only
    bool use_feat = true;  // weak mode only
    bool use_adv = true;
    bool update_encoder_from_rank = true;
    int pretrain_steps = 1000;
    int pretrain_batch = 16;
    double pretrain_lr = 3e-3;
    int gen_pretrain_steps = 500;
    int dataset_scenes = 200;
    std::uint64_t dataset_seed = 1;
    int checkpoint_every = 0;  // 0: final checkpoint only
    SceneSpec scene;
    NetConfig net;

    void validate() const;
    SceneSpec scene_for_mode() const;  // scene spec with supervision set from mode
};

struct TrainingPair {
    int category = -1;      // target category
    Box region;             // ground-truth region (supervised mode only)
    bool has_region = false;
    Tensor xpos, xneg;      // patch-sized samples
    int neg_category = -1;
};

// Supervised mode crops the positive/negative from the scene's ground-truth
// boxes; weak mode draws both from the category bank and never touches
// scene boxes.
TrainingPair select_pairs(const Scene& scene, int target_category, TrainMode mode,
                          const CategoryBank& bank, int patch_size, Rng& rng);

// K proposals with the highest mean heat inside the box, descending. Ties
// break toward smaller area, then scan order.
std::vector<Box> top_k_boxes(const HeatMap& map, const std::vector<Box>& proposals, int k);

struct TrainerState {
    AdamState opt_eg;
    AdamState opt_d;
    Rng rng;
    std::uint64_t step = 0;
    std::vector<Box> proposals;  // cached grid for the feature loss
    double disc_real_acc = 0.0;  // diagnostics from the last D phase
    double disc_fake_acc = 0.0;
};

void init_trainer_state(TrainerState& state, const Networks& nets, const TrainConfig& cfg);

// One alternating update: d_steps discriminator phases, then one
// encoder+generator phase. Deterministic in (cfg.seed, step_index).
LossReport train_step(const TrainConfig& cfg, const std::vector<const Scene*>& batch,
                      Networks& nets, TrainerState& state, std::uint64_t step_index);

struct TrainCallbacks {
    std::function<void(std::uint64_t step, const LossReport&)> on_step;
    std::function<void(std::uint64_t step, const Networks&, const TrainerState&)> on_checkpoint;
    std::function<void(std::uint64_t step, double cls_loss)> on_pretrain_step;
};

struct TrainResult {
    Networks nets;
    TrainerState state;
    std::vector<LossReport> reports;
};

// GAP-head classification pretraining over bank patches.
void pretrain_encoder(Networks& nets, const CategoryBank& bank, int steps, int batch,
                      std::uint64_t seed, AdamConfig adam,
                      const std::function<void(std::uint64_t, double)>& on_step = {});

// Reconstruction pretraining of the location encoder and generator on bank
// patches pasted into blank canvases (the encoder stays frozen). Gives the
// decoder its rendering ability before adversarial training starts.
void pretrain_generator(Networks& nets, const CategoryBank& bank, int steps, int batch,
                        std::uint64_t seed, AdamConfig adam,
                        const std::function<void(std::uint64_t, double)>& on_step = {});

// Full loop: dataset generation, optional pretraining, alternating updates.
// With init_nets the pretraining phase is skipped (parameters are taken as
// given). steps == 0 returns the initialization unchanged.
TrainResult train(const TrainConfig& cfg, const Networks* init_nets = nullptr,
                  const TrainCallbacks& callbacks = {});

}  // namespace rankgan
