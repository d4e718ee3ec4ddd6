#include "hemocnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hemocnn/errors.hpp"
#include "hemocnn/loss.hpp"
#include "hemocnn/rng.hpp"

namespace hemocnn {

namespace {

double loss_at(const Network& net, const Tensor& x, std::span<const std::size_t> labels) {
    return sparse_ce_value(softmax(net.forward(x, Mode::Infer)), labels);
}

}  // namespace

GradCheckResult grad_check(Network& net, const Tensor& x, std::span<const std::size_t> labels, double eps) {
    ForwardTrace trace;
    const Tensor logits = net.forward(x, Mode::Infer, {}, &trace);
    const auto lr = sparse_ce_loss(softmax(logits), labels);
    const auto grads = net.backward(lr.dlogits, trace);

    GradCheckResult result;
    auto& params = net.parameters();
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto values = params[pi].value.data();
        for (std::size_t k = 0; k < values.size(); ++k) {
            const Scalar saved = values[k];
            values[k] = static_cast<Scalar>(saved + eps);
            const double up = loss_at(net, x, labels);
            values[k] = static_cast<Scalar>(saved - eps);
            const double down = loss_at(net, x, labels);
            values[k] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw NumericError("grad_check: non-finite loss perturbing '" + params[pi].name + "'");
            }

            const double numeric = (up - down) / (2 * eps);
            const double analytic = grads[pi][k];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            const double rel = std::abs(analytic - numeric) / denom;
            ++result.checked;
            if (rel > result.max_rel_error || result.checked == 1) {
                result.max_rel_error = rel;
                result.worst_param = params[pi].name;
                result.worst_index = k;
                result.analytic = analytic;
                result.numeric = numeric;
            }
        }
    }
    return result;
}

double kink_margin(const Network& net, const Tensor& x) {
    ForwardTrace trace;
    net.forward(x, Mode::Infer, {}, &trace);
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& cache : trace.caches) {
        if (const auto* relu = std::get_if<ReluCache>(&cache)) {
            for (auto v : relu->input.data()) margin = std::min(margin, std::abs(static_cast<double>(v)));
        } else if (const auto* pool = std::get_if<PoolCache>(&cache)) {
            margin = std::min(margin, static_cast<double>(pool->min_gap));
        }
    }
    return margin;
}

GradCheckInstance make_gradcheck_instance(NetConfig cfg, std::uint64_t seed, std::size_t batch, double min_margin,
                                          std::size_t max_attempts) {
    for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
        const auto key = derive_key({seed, attempt, 0x67636b});
        cfg.seed = key;
        Network net(cfg);
        // The output layer is zero at init, which would zero every upstream
        // gradient; give it random weights so the whole chain is exercised.
        for (auto& p : net.parameters()) {
            if (p.name != "output.weights") continue;
            const double bound = std::sqrt(6.0 / static_cast<double>(p.value.extent(1)));
            CounterRng wrng(key + 3);
            for (auto& v : p.value.data()) v = static_cast<Scalar>(wrng.uniform(-bound, bound));
        }
        Tensor x({batch, cfg.input_channels, cfg.input_height, cfg.input_width}, Fill::uniform(0, 1, key + 1));
        CounterRng rng(key + 2);
        std::vector<std::size_t> labels(batch);
        for (auto& l : labels) l = static_cast<std::size_t>(rng.below(cfg.num_classes));
        if (kink_margin(net, x) >= min_margin) return {std::move(net), std::move(x), std::move(labels), attempt + 1};
    }
    throw NumericError("no gradient-check instance with kink margin >= " + std::to_string(min_margin) + " after " +
                       std::to_string(max_attempts) + " draws");
}

NetConfig tiny_gradcheck_config() {
    NetConfig cfg;
    cfg.input_height = 16;
    cfg.input_width = 16;
    cfg.conv_filters = {2, 2, 2, 2, 2, 2, 2, 4};
    cfg.dense_hidden = {8};
    cfg.num_classes = 8;
    return cfg;
}

NetConfig dense_only_gradcheck_config() {
    NetConfig cfg;
    cfg.input_height = 4;
    cfg.input_width = 4;
    cfg.conv_filters = {};
    cfg.dense_hidden = {6};
    cfg.num_classes = 3;
    return cfg;
}

}  // namespace hemocnn
