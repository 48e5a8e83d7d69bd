#pragma once

#include <string>

#include "rankgan/discovery.hpp"
#include "rankgan/training.hpp"

namespace rankgan {

struct EvalConfig {
    int eval_scenes = 100;
    std::uint64_t eval_seed = 7700;
    double iou_threshold = 0.5;
    int corloc_scenes = 200;
    std::uint64_t corloc_seed = 8800;
};

// Everything a pipeline run needs, mapped 1:1 onto the sectioned key=value
// config file (see FORMATS.md). Unknown keys are rejected.
struct Config {
    TrainConfig train;
    DiscoveryConfig discovery;
    DetectorConfig detector;
    EvalConfig eval;

    void validate() const;
};

Config default_config();

Config parse_config(const std::string& text);
Config parse_config_file(const std::string& path);

std::string serialize_config(const Config& cfg);

}  // namespace rankgan
