#pragma once

#include <cstdint>
#include <vector>

#include "rankgan/tensor.hpp"

namespace rankgan {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double epsilon = 1e-8;
};

// Bias-corrected Adam moments for a fixed, ordered parameter list.
struct AdamState {
    AdamConfig cfg;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    void init(const std::vector<Tensor>& params, const AdamConfig& config);
    bool initialized() const { return !m.empty(); }
};

// One update over all parameters using their accumulated grads. Parameters
// with no grad buffer are treated as zero-gradient (left unchanged).
void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace rankgan
