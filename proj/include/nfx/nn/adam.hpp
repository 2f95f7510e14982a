#pragma once

#include <cstdint>
#include <vector>

#include "nfx/nn/tensor.hpp"

namespace nfx::nn {

struct AdamState {
    Tensor m;
    Tensor v;
    std::int64_t step_count = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_param(const Parameter& p, double lr);
};

/// Bias-corrected Adam update; the parameter gradient is zeroed afterward.
void adam_step(Parameter& param, AdamState& state);

/// Convenience wrapper owning one AdamState per parameter.
class AdamOptimizer {
 public:
    AdamOptimizer(std::vector<Parameter>& params, double lr);

    void set_lr(double lr);
    void step();  // updates every parameter and zeroes its gradient

 private:
    std::vector<Parameter>* params_;
    std::vector<AdamState> states_;
};

}  // namespace nfx::nn
