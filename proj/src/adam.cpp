#include "hemocnn/adam.hpp"

#include <cmath>

#include "hemocnn/errors.hpp"

namespace hemocnn {

AdamState::AdamState(const std::vector<Parameter>& params, AdamHyper h) : hyper(h) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (const auto& p : params) {
        m.emplace_back(p.value.shape());
        v.emplace_back(p.value.shape());
    }
}

void adam_step(std::vector<Parameter>& params, const std::vector<Tensor>& grads, AdamState& state) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, " + std::to_string(state.m.size()) +
                         " moment slots");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& shape = params[i].value.shape();
        if (grads[i].shape() != shape || state.m[i].shape() != shape || state.v[i].shape() != shape) {
            throw ShapeError("adam_step: shape mismatch for parameter '" + params[i].name + "'");
        }
        if (!all_finite(grads[i])) throw NumericError("adam_step: non-finite gradient for '" + params[i].name + "'");
    }

    const auto& h = state.hyper;
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(h.beta1, t);
    const double c2 = 1.0 - std::pow(h.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto theta = params[i].value.data();
        auto g = grads[i].data();
        auto m = state.m[i].data();
        auto v = state.v[i].data();
        for (std::size_t k = 0; k < theta.size(); ++k) {
            const double gk = g[k];
            const double mk = h.beta1 * m[k] + (1.0 - h.beta1) * gk;
            const double vk = h.beta2 * v[k] + (1.0 - h.beta2) * gk * gk;
            m[k] = static_cast<Scalar>(mk);
            v[k] = static_cast<Scalar>(vk);
            const double m_hat = mk / c1;
            const double v_hat = vk / c2;
            theta[k] = static_cast<Scalar>(theta[k] - h.alpha * m_hat / (std::sqrt(v_hat) + h.epsilon));
        }
    }
}

}  // namespace hemocnn
