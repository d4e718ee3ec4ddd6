#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hemocnn/network.hpp"

namespace hemocnn {

struct GradCheckResult {
    double max_rel_error = 0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double analytic = 0;  // at the worst entry
    double numeric = 0;
    std::size_t checked = 0;
};

/// Compares backward() against central differences (L(t+eps) - L(t-eps)) / 2eps
/// for every parameter entry. Dropout runs in inference mode throughout.
/// Relative error is |a-n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(Network& net, const Tensor& x, std::span<const std::size_t> labels, double eps = 1e-5);

/// Smallest distance of any ReLU input from 0, or of any pooling maximum
/// from its runner-up, over an inference forward pass. Finite differences
/// are only meaningful when this is well above eps.
double kink_margin(const Network& net, const Tensor& x);

/// A network plus a batch drawn so that kink_margin >= min_margin.
struct GradCheckInstance {
    Network net;
    Tensor x;
    std::vector<std::size_t> labels;
    std::size_t attempts = 0;
};

/// Draws weights and a random batch from a stream keyed on `seed`, rejecting
/// draws whose kink margin is below `min_margin`. Throws NumericError if no
/// draw qualifies within `max_attempts`.
GradCheckInstance make_gradcheck_instance(NetConfig cfg, std::uint64_t seed, std::size_t batch = 2,
                                          double min_margin = 1e-3, std::size_t max_attempts = 200);

/// The miniature full topology: filters [2,2,2,2,2,2,2,4], 16x16 input,
/// 8 classes, one hidden dense layer of 8.
NetConfig tiny_gradcheck_config();

/// Conv-free variant (flatten straight into the dense stack).
NetConfig dense_only_gradcheck_config();

}  // namespace hemocnn
