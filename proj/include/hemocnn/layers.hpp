#pragma once

// Forward/backward kernels for every layer type in the classifier.
// Each forward returns its output plus a cache; the matching backward must
// be called with the cache from that same forward invocation.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hemocnn/tensor.hpp"

namespace hemocnn {

enum class Mode { Train, Infer };

// ---------------------------------------------------------------------------
// Conv2D: 3x3 kernel, stride 1, zero 'same' padding.

struct ConvParams {
    Tensor kernels;  // [Cout, Cin, 3, 3]
    Tensor bias;     // [Cout]

    std::size_t out_channels() const { return kernels.extent(0); }
    std::size_t in_channels() const { return kernels.extent(1); }
};

struct ConvCache {
    Shape input_shape;
    std::vector<Tensor> cols;  // one im2col matrix per sample
};

struct ConvGrads {
    Tensor dx;
    Tensor dkernels;
    Tensor dbias;
};

std::pair<Tensor, ConvCache> conv2d_forward(const Tensor& x, const ConvParams& p);
ConvGrads conv2d_backward(const Tensor& dy, const ConvCache& cache, const ConvParams& p);

// ---------------------------------------------------------------------------
// MaxPool2D: 2x2 window, stride 1 or 2.

struct PoolOptions {
    std::size_t stride = 2;
    // Ceil mode pads bottom/right with -inf so the output extent is ceil(H/stride).
    bool ceil = true;
};

/// Output extent along one axis; 0 means the layer collapses.
std::size_t pool_output_extent(std::size_t in, const PoolOptions& opts);

struct PoolCache {
    Shape input_shape;
    std::vector<std::size_t> winners;  // flat input index for each output element
    // Smallest (max - runner-up) over windows with a positive maximum.
    Scalar min_gap = std::numeric_limits<Scalar>::infinity();
};

/// `layer_name` only decorates the ConfigError raised when the output would be empty.
std::pair<Tensor, PoolCache> maxpool2d_forward(const Tensor& x, const PoolOptions& opts,
                                               const std::string& layer_name = "maxpool");
Tensor maxpool2d_backward(const Tensor& dy, const PoolCache& cache);

// ---------------------------------------------------------------------------
// ReLU. The derivative at exactly 0 is 0.

struct ReluCache {
    Tensor input;
};

std::pair<Tensor, ReluCache> relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& dy, const ReluCache& cache);

// ---------------------------------------------------------------------------
// Inverted dropout: kept activations are scaled by 1/(1-rate) at train time,
// inference is the identity.

struct DropoutCache {
    Tensor mask;  // already scaled; empty when the layer was a pass-through
};

/// `key` seeds a CounterRng; derive it from (seed, layer, epoch, batch).
std::pair<Tensor, DropoutCache> dropout_forward(const Tensor& x, Scalar rate, Mode mode, std::uint64_t key);
Tensor dropout_backward(const Tensor& dy, const DropoutCache& cache);

// ---------------------------------------------------------------------------
// Flatten [N, C, H, W] -> [N, C*H*W].

Tensor flatten(const Tensor& x);
Tensor unflatten(const Tensor& dy, const Shape& input_shape);

// ---------------------------------------------------------------------------
// Dense: y = x W^T + b.

struct DenseParams {
    Tensor weights;  // [out, in]
    Tensor bias;     // [out]
};

struct DenseCache {
    Tensor input;
};

struct DenseGrads {
    Tensor dx;
    Tensor dweights;
    Tensor dbias;
};

std::pair<Tensor, DenseCache> dense_forward(const Tensor& x, const DenseParams& p);
DenseGrads dense_backward(const Tensor& dy, const DenseCache& cache, const DenseParams& p);

// ---------------------------------------------------------------------------

/// Row-wise softmax with max shift. Throws NumericError on non-finite logits.
Tensor softmax(const Tensor& logits);

}  // namespace hemocnn
