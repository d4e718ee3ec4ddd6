#pragma once

#include <cstddef>
#include <span>

#include "hemocnn/tensor.hpp"

namespace hemocnn {

/// Probabilities are clamped to this before taking the log.
inline constexpr Scalar kLogClamp = Scalar(1e-12);

struct LossResult {
    Scalar loss = 0;
    Tensor dlogits;  // gradient w.r.t. the pre-softmax logits
};

/// Mean sparse categorical cross-entropy over the batch, fused with the
/// softmax gradient: dlogits = (probs - onehot(labels)) / N.
/// Throws LabelError naming the first sample whose label is outside [0, K).
LossResult sparse_ce_loss(const Tensor& probs, std::span<const std::size_t> labels);

/// Loss only, no gradient.
Scalar sparse_ce_value(const Tensor& probs, std::span<const std::size_t> labels);

}  // namespace hemocnn
