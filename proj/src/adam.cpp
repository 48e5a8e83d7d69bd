#include "rankgan/adam.hpp"

#include <cmath>

namespace rankgan {

void AdamState::init(const std::vector<Tensor>& params, const AdamConfig& config) {
    cfg = config;
    step = 0;
    m.clear();
    v.clear();
    m.reserve(params.size());
    v.reserve(params.size());
    for (const auto& p : params) {
        m.emplace_back(p.size(), 0.0);
        v.emplace_back(p.size(), 0.0);
    }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw OptimizerError("adam_step: state does not match parameter list");
    state.step += 1;
    const double b1 = state.cfg.beta1;
    const double b2 = state.cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    static const std::vector<double> kNoGrad;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = params[pi];
        if (state.m[pi].size() != p.size())
            throw OptimizerError("adam_step: moment shape mismatch for '" + p.name() + "'");
        // A parameter backward() never reached carries an exact zero gradient.
        const std::vector<double>& g = p.has_grad() ? p.grad() : kNoGrad;
        auto& vals = p.mutable_values();
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double gi = g.empty() ? 0.0 : g[i];
            if (!std::isfinite(gi))
                throw OptimizerError("adam_step: non-finite gradient in parameter '" +
                                     p.name() + "'");
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            vals[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.epsilon);
        }
    }
}

}  // namespace rankgan
