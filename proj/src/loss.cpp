#include "hemocnn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "hemocnn/errors.hpp"

namespace hemocnn {

namespace {

void check_inputs(const Tensor& probs, std::span<const std::size_t> labels) {
    if (probs.rank() != 2) throw ShapeError("sparse_ce_loss: probs must be [N,K], got " + to_string(probs.shape()));
    if (labels.size() != probs.extent(0)) {
        throw ShapeError("sparse_ce_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(probs.extent(0)) + " rows");
    }
    const std::size_t k = probs.extent(1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= k) {
            throw LabelError("sample " + std::to_string(i) + ": label " + std::to_string(labels[i]) +
                                 " outside [0, " + std::to_string(k) + ")",
                             i);
        }
    }
}

}  // namespace

Scalar sparse_ce_value(const Tensor& probs, std::span<const std::size_t> labels) {
    check_inputs(probs, labels);
    const std::size_t n = probs.extent(0);
    Scalar total = 0;
    for (std::size_t i = 0; i < n; ++i) total -= std::log(std::max(probs.at(i, labels[i]), kLogClamp));
    const Scalar loss = total / static_cast<Scalar>(n);
    if (!std::isfinite(loss)) throw NumericError("sparse_ce_loss: non-finite loss");
    return loss;
}

LossResult sparse_ce_loss(const Tensor& probs, std::span<const std::size_t> labels) {
    LossResult r;
    r.loss = sparse_ce_value(probs, labels);
    const std::size_t n = probs.extent(0);
    const Scalar inv_n = Scalar{1} / static_cast<Scalar>(n);
    r.dlogits = probs;
    for (std::size_t i = 0; i < n; ++i) {
        r.dlogits.at(i, labels[i]) -= 1;
        for (std::size_t c = 0; c < probs.extent(1); ++c) r.dlogits.at(i, c) *= inv_n;
    }
    return r;
}

}  // namespace hemocnn
