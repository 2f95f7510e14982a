#include "nfx/nn/adam.hpp"

#include <cmath>

namespace nfx::nn {

AdamState AdamState::for_param(const Parameter& p, double lr) {
    AdamState s;
    s.m = Tensor(p.value.shape);
    s.v = Tensor(p.value.shape);
    s.lr = lr;
    return s;
}

void adam_step(Parameter& param, AdamState& state) {
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < param.value.size(); ++i) {
        const double gr = param.grad.data[i];
        state.m.data[i] = state.beta1 * state.m.data[i] + (1.0 - state.beta1) * gr;
        state.v.data[i] = state.beta2 * state.v.data[i] + (1.0 - state.beta2) * gr * gr;
        const double mhat = state.m.data[i] / bc1;
        const double vhat = state.v.data[i] / bc2;
        param.value.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
    param.zero_grad();
}

AdamOptimizer::AdamOptimizer(std::vector<Parameter>& params, double lr) : params_(&params) {
    states_.reserve(params.size());
    for (const Parameter& p : params) states_.push_back(AdamState::for_param(p, lr));
}

void AdamOptimizer::set_lr(double lr) {
    for (AdamState& s : states_) s.lr = lr;
}

void AdamOptimizer::step() {
    for (std::size_t i = 0; i < params_->size(); ++i) adam_step((*params_)[i], states_[i]);
}

}  // namespace nfx::nn
