#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "hemocnn/adam.hpp"
#include "hemocnn/layers.hpp"
#include "hemocnn/tensor.hpp"

namespace hemocnn {

/// Architecture description. Defaults describe the full 22-layer classifier:
/// eight [conv3x3 + ReLU -> maxpool2x2 -> dropout] blocks, flatten, five
/// hidden dense layers and a softmax output layer.
struct NetConfig {
    std::size_t input_height = 100;
    std::size_t input_width = 100;
    std::size_t input_channels = 3;
    std::vector<std::size_t> conv_filters{32, 64, 64, 128, 256, 256, 256, 512};
    std::size_t pool_stride = 2;
    bool pool_ceil = true;
    double dropout_rate = 0.25;
    std::vector<std::size_t> dense_hidden{128, 128, 128, 128, 128};
    std::size_t num_classes = 8;
    std::uint64_t seed = 0;

    /// The literal stride-1 pooling variant.
    static NetConfig literal_paper();

    bool operator==(const NetConfig&) const = default;
};

void to_json(nlohmann::json& j, const NetConfig& cfg);
void from_json(const nlohmann::json& j, NetConfig& cfg);

enum class LayerKind { Conv, Relu, MaxPool, Dropout, Flatten, Dense, Softmax };

const char* to_string(LayerKind kind);

struct LayerSpec {
    LayerKind kind;
    std::string name;
    Shape output_shape;  // per sample: [C,H,W] before flatten, [F] after
    bool counted = false;  // contributes to the reported layer total
};

struct ParamSpec {
    std::string name;
    Shape shape;
};

/// Validated architecture without any weights allocated.
struct NetworkPlan {
    NetConfig config;
    std::vector<LayerSpec> layers;
    std::vector<ParamSpec> params;
    std::size_t counted_layers = 0;
    std::size_t flatten_width = 0;
    std::uint64_t param_count = 0;
    std::uint64_t largest_layer_params = 0;
    std::vector<std::string> warnings;
};

/// Any single layer above this many parameters triggers a feasibility warning.
inline constexpr std::uint64_t kFeasibleLayerParams = 100'000'000;

/// Checks every layer's extents. Throws ConfigError naming the block where
/// pooling would collapse the feature map.
NetworkPlan plan_network(const NetConfig& cfg);

/// Per-forward-pass state consumed by backward.
struct ForwardTrace {
    using Cache = std::variant<ConvCache, ReluCache, PoolCache, DropoutCache, Shape, DenseCache>;
    std::vector<Cache> caches;  // one per non-softmax layer
};

/// Identifies one mini-batch so dropout masks are reproducible.
struct DropoutContext {
    std::uint64_t seed = 0;
    std::uint64_t epoch = 0;
    std::uint64_t batch = 0;
};

class Network {
public:
    /// Plans then allocates; weights are He-uniform, biases zero.
    explicit Network(const NetConfig& cfg);
    Network(NetworkPlan plan, std::vector<Parameter> params);

    const NetConfig& config() const noexcept { return plan_.config; }
    const NetworkPlan& plan() const noexcept { return plan_; }
    std::size_t counted_layers() const noexcept { return plan_.counted_layers; }

    std::vector<Parameter>& parameters() noexcept { return params_; }
    const std::vector<Parameter>& parameters() const noexcept { return params_; }

    /// Returns logits [N, K]. Pass a trace to record caches for backward.
    Tensor forward(const Tensor& x, Mode mode, const DropoutContext& ctx = {}, ForwardTrace* trace = nullptr) const;

    /// Gradients for every parameter, in parameters() order.
    std::vector<Tensor> backward(const Tensor& dlogits, const ForwardTrace& trace) const;

    /// Test-only mutation hook: when set, conv kernel gradients are scaled by
    /// this factor inside backward().
    void set_conv_grad_fault(Scalar factor) noexcept { conv_grad_fault_ = factor; }

private:
    void check_input(const Tensor& x) const;

    NetworkPlan plan_;
    std::vector<Parameter> params_;
    Scalar conv_grad_fault_ = 1;
};

inline Network build_network(const NetConfig& cfg) { return Network(cfg); }

std::uint64_t param_count(const Network& net);

struct Prediction {
    Tensor probs;                     // [N, K]
    std::vector<std::size_t> labels;  // row argmax, lowest index on ties
};

/// Full inference pass (dropout off).
Prediction predict(const Network& net, const Tensor& batch);

}  // namespace hemocnn
