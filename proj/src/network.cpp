#include "hemocnn/network.hpp"

#include <cmath>

#include "hemocnn/errors.hpp"
#include "hemocnn/rng.hpp"

namespace hemocnn {

NetConfig NetConfig::literal_paper() {
    NetConfig cfg;
    cfg.pool_stride = 1;
    cfg.pool_ceil = false;
    return cfg;
}

void to_json(nlohmann::json& j, const NetConfig& cfg) {
    j = nlohmann::json{{"input_height", cfg.input_height},
                       {"input_width", cfg.input_width},
                       {"input_channels", cfg.input_channels},
                       {"conv_filters", cfg.conv_filters},
                       {"pool_stride", cfg.pool_stride},
                       {"pool_ceil", cfg.pool_ceil},
                       {"dropout_rate", cfg.dropout_rate},
                       {"dense_hidden", cfg.dense_hidden},
                       {"num_classes", cfg.num_classes},
                       {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, NetConfig& cfg) {
    j.at("input_height").get_to(cfg.input_height);
    j.at("input_width").get_to(cfg.input_width);
    j.at("input_channels").get_to(cfg.input_channels);
    j.at("conv_filters").get_to(cfg.conv_filters);
    j.at("pool_stride").get_to(cfg.pool_stride);
    j.at("pool_ceil").get_to(cfg.pool_ceil);
    j.at("dropout_rate").get_to(cfg.dropout_rate);
    j.at("dense_hidden").get_to(cfg.dense_hidden);
    j.at("num_classes").get_to(cfg.num_classes);
    j.at("seed").get_to(cfg.seed);
}

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv: return "conv";
        case LayerKind::Relu: return "relu";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Dense: return "dense";
        case LayerKind::Softmax: return "softmax";
    }
    return "?";
}

NetworkPlan plan_network(const NetConfig& cfg) {
    if (cfg.input_channels < 1 || cfg.input_height < 1 || cfg.input_width < 1) {
        throw ConfigError("input extents must be >= 1");
    }
    if (cfg.num_classes < 1) throw ConfigError("num_classes must be >= 1");
    if (!(cfg.dropout_rate >= 0) || cfg.dropout_rate >= 1) throw ConfigError("dropout rate must lie in [0, 1)");
    if (cfg.pool_stride != 1 && cfg.pool_stride != 2) throw ConfigError("pool stride must be 1 or 2");
    for (auto f : cfg.conv_filters)
        if (f < 1) throw ConfigError("conv filter counts must be >= 1");
    for (auto d : cfg.dense_hidden)
        if (d < 1) throw ConfigError("dense layer widths must be >= 1");

    NetworkPlan plan;
    plan.config = cfg;
    const PoolOptions pool{cfg.pool_stride, cfg.pool_ceil};

    auto note_params = [&plan](std::uint64_t n) {
        plan.param_count += n;
        plan.largest_layer_params = std::max(plan.largest_layer_params, n);
    };

    std::size_t c = cfg.input_channels, h = cfg.input_height, w = cfg.input_width;
    for (std::size_t b = 0; b < cfg.conv_filters.size(); ++b) {
        const std::string block = "block" + std::to_string(b + 1);
        const std::size_t cout = cfg.conv_filters[b];
        const std::string conv = "conv" + std::to_string(b);
        plan.layers.push_back({LayerKind::Conv, conv, {cout, h, w}, true});
        plan.params.push_back({conv + ".kernels", {cout, c, 3, 3}});
        plan.params.push_back({conv + ".bias", {cout}});
        note_params(static_cast<std::uint64_t>(9 * c + 1) * cout);
        plan.layers.push_back({LayerKind::Relu, "relu" + std::to_string(b), {cout, h, w}, false});
        c = cout;

        const std::size_t oh = pool_output_extent(h, pool), ow = pool_output_extent(w, pool);
        if (oh < 1 || ow < 1) {
            throw ConfigError(block + ": 2x2 max pooling with stride " + std::to_string(cfg.pool_stride) +
                              (cfg.pool_ceil ? " (ceil mode)" : " (exact mode)") + " collapses a " +
                              std::to_string(h) + "x" + std::to_string(w) + " feature map");
        }
        h = oh;
        w = ow;
        plan.layers.push_back({LayerKind::MaxPool, "pool" + std::to_string(b), {c, h, w}, true});
        plan.layers.push_back({LayerKind::Dropout, "dropout" + std::to_string(b), {c, h, w}, false});
    }

    plan.flatten_width = c * h * w;
    plan.layers.push_back({LayerKind::Flatten, "flatten", {plan.flatten_width}, false});

    std::size_t in = plan.flatten_width;
    for (std::size_t d = 0; d < cfg.dense_hidden.size(); ++d) {
        const std::string name = "dense" + std::to_string(d);
        const std::size_t out = cfg.dense_hidden[d];
        plan.layers.push_back({LayerKind::Dense, name, {out}, true});
        plan.layers.push_back({LayerKind::Relu, "dense_relu" + std::to_string(d), {out}, false});
        plan.params.push_back({name + ".weights", {out, in}});
        plan.params.push_back({name + ".bias", {out}});
        note_params(static_cast<std::uint64_t>(in + 1) * out);
        in = out;
    }
    plan.layers.push_back({LayerKind::Dense, "output", {cfg.num_classes}, true});
    plan.params.push_back({"output.weights", {cfg.num_classes, in}});
    plan.params.push_back({"output.bias", {cfg.num_classes}});
    note_params(static_cast<std::uint64_t>(in + 1) * cfg.num_classes);
    plan.layers.push_back({LayerKind::Softmax, "softmax", {cfg.num_classes}, false});

    for (const auto& l : plan.layers)
        if (l.counted) ++plan.counted_layers;

    if (plan.largest_layer_params > kFeasibleLayerParams) {
        plan.warnings.push_back("largest layer holds " + std::to_string(plan.largest_layer_params) +
                                " parameters (flatten width " + std::to_string(plan.flatten_width) +
                                "); this configuration is not trainable in practice");
    }
    return plan;
}

namespace {

std::vector<Parameter> init_parameters(const NetworkPlan& plan) {
    std::vector<Parameter> params;
    params.reserve(plan.params.size());
    for (std::size_t i = 0; i < plan.params.size(); ++i) {
        const auto& spec = plan.params[i];
        Tensor t(spec.shape);
        // The softmax layer starts at zero so initial logits are exactly 0.
        if (spec.shape.size() > 1 && spec.name != "output.weights") {
            // He-uniform: bound sqrt(6 / fan_in); fan_in = Cin*9 or dense input width.
            const std::size_t fan_in = t.size() / spec.shape[0];
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            CounterRng rng(derive_key({plan.config.seed, 0x1417, i}));
            for (auto& v : t.data()) v = static_cast<Scalar>(rng.uniform(-bound, bound));
        }
        params.push_back({spec.name, std::move(t)});
    }
    return params;
}

}  // namespace

Network::Network(const NetConfig& cfg) : plan_(plan_network(cfg)), params_(init_parameters(plan_)) {}

Network::Network(NetworkPlan plan, std::vector<Parameter> params) : plan_(std::move(plan)), params_(std::move(params)) {
    if (params_.size() != plan_.params.size()) throw ShapeError("parameter count does not match the plan");
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].value.shape() != plan_.params[i].shape) {
            throw ShapeError("parameter '" + plan_.params[i].name + "' has shape " +
                             to_string(params_[i].value.shape()) + ", plan expects " +
                             to_string(plan_.params[i].shape));
        }
    }
}

void Network::check_input(const Tensor& x) const {
    const auto& cfg = plan_.config;
    if (x.rank() != 4 || x.extent(1) != cfg.input_channels || x.extent(2) != cfg.input_height ||
        x.extent(3) != cfg.input_width) {
        throw ShapeError("network expects [N," + std::to_string(cfg.input_channels) + "," +
                         std::to_string(cfg.input_height) + "," + std::to_string(cfg.input_width) + "], got " +
                         to_string(x.shape()));
    }
}

Tensor Network::forward(const Tensor& x, Mode mode, const DropoutContext& ctx, ForwardTrace* trace) const {
    check_input(x);
    const auto& cfg = plan_.config;
    const PoolOptions pool{cfg.pool_stride, cfg.pool_ceil};
    if (trace) trace->caches.clear();

    Tensor a = x;
    std::size_t p = 0;
    for (std::size_t li = 0; li < plan_.layers.size(); ++li) {
        const auto& layer = plan_.layers[li];
        switch (layer.kind) {
            case LayerKind::Conv: {
                const ConvParams cp{params_[p].value, params_[p + 1].value};
                auto [y, cache] = conv2d_forward(a, cp);
                a = std::move(y);
                if (trace) trace->caches.emplace_back(std::move(cache));
                p += 2;
                break;
            }
            case LayerKind::Dense: {
                const DenseParams dp{params_[p].value, params_[p + 1].value};
                auto [y, cache] = dense_forward(a, dp);
                a = std::move(y);
                if (trace) trace->caches.emplace_back(std::move(cache));
                p += 2;
                break;
            }
            case LayerKind::Relu: {
                auto [y, cache] = relu_forward(a);
                a = std::move(y);
                if (trace) trace->caches.emplace_back(std::move(cache));
                break;
            }
            case LayerKind::MaxPool: {
                auto [y, cache] = maxpool2d_forward(a, pool, layer.name);
                a = std::move(y);
                if (trace) trace->caches.emplace_back(std::move(cache));
                break;
            }
            case LayerKind::Dropout: {
                const auto key = derive_key({ctx.seed, li, ctx.epoch, ctx.batch});
                auto [y, cache] = dropout_forward(a, static_cast<Scalar>(cfg.dropout_rate), mode, key);
                a = std::move(y);
                if (trace) trace->caches.emplace_back(std::move(cache));
                break;
            }
            case LayerKind::Flatten: {
                if (trace) trace->caches.emplace_back(a.shape());
                a = flatten(a);
                break;
            }
            case LayerKind::Softmax:
                // Softmax is fused into the loss; forward() returns logits.
                break;
        }
    }
    return a;
}

std::vector<Tensor> Network::backward(const Tensor& dlogits, const ForwardTrace& trace) const {
    std::vector<Tensor> grads(params_.size());
    Tensor d = dlogits;
    std::size_t p = params_.size();
    std::size_t ci = trace.caches.size();
    for (std::size_t li = plan_.layers.size(); li-- > 0;) {
        const auto& layer = plan_.layers[li];
        if (layer.kind == LayerKind::Softmax) continue;
        if (ci == 0) throw ShapeError("backward: trace is shorter than the network");
        const auto& cache = trace.caches[--ci];
        switch (layer.kind) {
            case LayerKind::Conv: {
                p -= 2;
                const ConvParams cp{params_[p].value, params_[p + 1].value};
                auto g = conv2d_backward(d, std::get<ConvCache>(cache), cp);
                if (conv_grad_fault_ != Scalar{1})
                    for (auto& v : g.dkernels.data()) v *= conv_grad_fault_;
                grads[p] = std::move(g.dkernels);
                grads[p + 1] = std::move(g.dbias);
                d = std::move(g.dx);
                break;
            }
            case LayerKind::Dense: {
                p -= 2;
                const DenseParams dp{params_[p].value, params_[p + 1].value};
                auto g = dense_backward(d, std::get<DenseCache>(cache), dp);
                grads[p] = std::move(g.dweights);
                grads[p + 1] = std::move(g.dbias);
                d = std::move(g.dx);
                break;
            }
            case LayerKind::Relu: d = relu_backward(d, std::get<ReluCache>(cache)); break;
            case LayerKind::MaxPool: d = maxpool2d_backward(d, std::get<PoolCache>(cache)); break;
            case LayerKind::Dropout: d = dropout_backward(d, std::get<DropoutCache>(cache)); break;
            case LayerKind::Flatten: d = unflatten(d, std::get<Shape>(cache)); break;
            case LayerKind::Softmax: break;
        }
    }
    return grads;
}

std::uint64_t param_count(const Network& net) {
    std::uint64_t n = 0;
    for (const auto& p : net.parameters()) n += p.value.size();
    return n;
}

Prediction predict(const Network& net, const Tensor& batch) {
    Prediction out;
    out.probs = softmax(net.forward(batch, Mode::Infer));
    out.labels = argmax_axis(out.probs, 1);
    return out;
}

}  // namespace hemocnn
