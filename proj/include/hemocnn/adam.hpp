#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hemocnn/tensor.hpp"

namespace hemocnn {

/// A named trainable tensor.
struct Parameter {
    std::string name;
    Tensor value;
};

struct AdamHyper {
    double alpha = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment estimates, one pair per parameter, plus the step count.
struct AdamState {
    AdamHyper hyper;
    std::uint64_t t = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    AdamState() = default;
    explicit AdamState(const std::vector<Parameter>& params, AdamHyper h = {});
};

/// One bias-corrected Adam update of every parameter.
/// Throws ShapeError on misaligned inputs and NumericError naming the
/// parameter when a gradient is non-finite (nothing is updated in that case).
void adam_step(std::vector<Parameter>& params, const std::vector<Tensor>& grads, AdamState& state);

}  // namespace hemocnn
