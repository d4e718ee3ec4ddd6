#include "hemocnn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "hemocnn/errors.hpp"
#include "hemocnn/rng.hpp"

namespace hemocnn {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                         to_string(t.shape()));
    }
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
    if (t.shape() != expected) {
        throw ShapeError(std::string(what) + ": expected shape " + to_string(expected) + ", got " +
                         to_string(t.shape()));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2D

std::pair<Tensor, ConvCache> conv2d_forward(const Tensor& x, const ConvParams& p) {
    require_rank(x, 4, "conv2d_forward");
    require_rank(p.kernels, 4, "conv2d_forward kernels");
    if (p.kernels.extent(2) != 3 || p.kernels.extent(3) != 3) {
        throw ShapeError("conv2d_forward: kernels must be 3x3, got " + to_string(p.kernels.shape()));
    }
    const std::size_t n = x.extent(0), cin = x.extent(1), h = x.extent(2), w = x.extent(3);
    const std::size_t cout = p.out_channels();
    if (cin != p.in_channels()) {
        throw ShapeError("conv2d_forward: input has " + std::to_string(cin) + " channels, kernels expect " +
                         std::to_string(p.in_channels()));
    }
    require_shape(p.bias, {cout}, "conv2d_forward bias");

    // Kernels viewed as [Cout, Cin*9] share the row order of im2col.
    const Tensor wmat = p.kernels.reshaped({cout, cin * 9});
    const std::size_t plane = cin * h * w;
    const std::size_t hw = h * w;

    ConvCache cache{x.shape(), {}};
    cache.cols.reserve(n);
    Tensor y({n, cout, h, w});
    for (std::size_t s = 0; s < n; ++s) {
        Tensor cols = im2col(x.data().subspan(s * plane, plane), cin, h, w);
        const Tensor out = matmul(wmat, cols);
        Scalar* dst = &y.data()[s * cout * hw];
        for (std::size_t o = 0; o < cout; ++o) {
            const Scalar b = p.bias[o];
            for (std::size_t k = 0; k < hw; ++k) dst[o * hw + k] = out[o * hw + k] + b;
        }
        cache.cols.push_back(std::move(cols));
    }
    return {std::move(y), std::move(cache)};
}

ConvGrads conv2d_backward(const Tensor& dy, const ConvCache& cache, const ConvParams& p) {
    const std::size_t n = cache.input_shape.at(0), cin = cache.input_shape.at(1);
    const std::size_t h = cache.input_shape.at(2), w = cache.input_shape.at(3);
    const std::size_t cout = p.out_channels();
    require_shape(dy, {n, cout, h, w}, "conv2d_backward dy");
    if (cache.cols.size() != n) throw ShapeError("conv2d_backward: cache does not match dy batch");

    const std::size_t hw = h * w;
    const Tensor wmat = p.kernels.reshaped({cout, cin * 9});

    ConvGrads g{Tensor(cache.input_shape), Tensor(p.kernels.shape()), Tensor({cout})};
    Tensor dw({cout, cin * 9});
    for (std::size_t s = 0; s < n; ++s) {
        const auto dy_s = dy.data().subspan(s * cout * hw, cout * hw);
        const Tensor dy_mat({cout, hw}, std::vector<Scalar>(dy_s.begin(), dy_s.end()));

        const Tensor dw_s = gemm(dy_mat, Transpose::No, cache.cols[s], Transpose::Yes);
        for (std::size_t i = 0; i < dw.size(); ++i) dw[i] += dw_s[i];

        for (std::size_t o = 0; o < cout; ++o) {
            Scalar acc = 0;
            for (std::size_t k = 0; k < hw; ++k) acc += dy_mat[o * hw + k];
            g.dbias[o] += acc;
        }

        const Tensor dcols = gemm(wmat, Transpose::Yes, dy_mat, Transpose::No);
        col2im(dcols, cin, h, w, g.dx.data().subspan(s * cin * hw, cin * hw));
    }
    g.dkernels = dw.reshaped(p.kernels.shape());
    return g;
}

// ---------------------------------------------------------------------------
// MaxPool2D

std::size_t pool_output_extent(std::size_t in, const PoolOptions& opts) {
    if (opts.stride == 0) return 0;
    if (opts.ceil) return (in + opts.stride - 1) / opts.stride;
    if (in < 2) return 0;
    return (in - 2) / opts.stride + 1;
}

std::pair<Tensor, PoolCache> maxpool2d_forward(const Tensor& x, const PoolOptions& opts,
                                               const std::string& layer_name) {
    require_rank(x, 4, "maxpool2d_forward");
    if (opts.stride != 1 && opts.stride != 2) {
        throw ConfigError(layer_name + ": pooling stride must be 1 or 2, got " + std::to_string(opts.stride));
    }
    const std::size_t n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    const std::size_t oh = pool_output_extent(h, opts), ow = pool_output_extent(w, opts);
    if (oh < 1 || ow < 1) {
        throw ConfigError(layer_name + ": 2x2 pooling with stride " + std::to_string(opts.stride) +
                          (opts.ceil ? " (ceil)" : " (exact)") + " collapses input " + std::to_string(h) + "x" +
                          std::to_string(w));
    }

    Tensor y({n, c, oh, ow});
    PoolCache cache{x.shape(), std::vector<std::size_t>(y.size()), std::numeric_limits<Scalar>::infinity()};
    std::size_t out = 0;
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t base = (s * c + ch) * h * w;
            for (std::size_t i = 0; i < oh; ++i) {
                for (std::size_t j = 0; j < ow; ++j, ++out) {
                    Scalar best = -std::numeric_limits<Scalar>::infinity();
                    Scalar second = -std::numeric_limits<Scalar>::infinity();
                    std::size_t winner = 0;
                    bool have = false;
                    // Row-major window order; strict '>' keeps the first maximum.
                    for (std::size_t u = 0; u < 2; ++u) {
                        const std::size_t r = i * opts.stride + u;
                        if (r >= h) continue;
                        for (std::size_t v = 0; v < 2; ++v) {
                            const std::size_t col = j * opts.stride + v;
                            if (col >= w) continue;
                            const std::size_t idx = base + r * w + col;
                            const Scalar val = x[idx];
                            if (!have || val > best) {
                                second = best;
                                best = val;
                                winner = idx;
                                have = true;
                            } else if (val > second) {
                                second = val;
                            }
                        }
                    }
                    y[out] = best;
                    cache.winners[out] = winner;
                    if (best > 0 && std::isfinite(second)) cache.min_gap = std::min(cache.min_gap, best - second);
                }
            }
        }
    }
    return {std::move(y), std::move(cache)};
}

Tensor maxpool2d_backward(const Tensor& dy, const PoolCache& cache) {
    if (dy.size() != cache.winners.size()) {
        throw ShapeError("maxpool2d_backward: dy " + to_string(dy.shape()) + " does not match cached forward output");
    }
    Tensor dx(cache.input_shape);
    for (std::size_t k = 0; k < dy.size(); ++k) dx[cache.winners[k]] += dy[k];
    return dx;
}

// ---------------------------------------------------------------------------
// ReLU

std::pair<Tensor, ReluCache> relu_forward(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data()) v = v > 0 ? v : Scalar{0};
    return {std::move(y), ReluCache{x}};
}

Tensor relu_backward(const Tensor& dy, const ReluCache& cache) {
    require_shape(dy, cache.input.shape(), "relu_backward");
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (!(cache.input[i] > 0)) dx[i] = 0;
    return dx;
}

// ---------------------------------------------------------------------------
// Dropout

std::pair<Tensor, DropoutCache> dropout_forward(const Tensor& x, Scalar rate, Mode mode, std::uint64_t key) {
    if (!(rate >= 0) || rate >= 1) {
        throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
    if (mode == Mode::Infer || rate == 0) return {x, DropoutCache{}};

    const Scalar keep_scale = Scalar{1} / (Scalar{1} - rate);
    CounterRng rng(key);
    Tensor mask(x.shape());
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const bool keep = rng.uniform() >= static_cast<double>(rate);
        mask[i] = keep ? keep_scale : Scalar{0};
        y[i] *= mask[i];
    }
    return {std::move(y), DropoutCache{std::move(mask)}};
}

Tensor dropout_backward(const Tensor& dy, const DropoutCache& cache) {
    if (cache.mask.empty()) return dy;
    return mul(dy, cache.mask);
}

// ---------------------------------------------------------------------------
// Flatten

Tensor flatten(const Tensor& x) {
    if (x.rank() < 2) throw ShapeError("flatten: expected a batched tensor, got " + to_string(x.shape()));
    return x.reshaped({x.extent(0), x.size() / x.extent(0)});
}

Tensor unflatten(const Tensor& dy, const Shape& input_shape) { return dy.reshaped(input_shape); }

// ---------------------------------------------------------------------------
// Dense

std::pair<Tensor, DenseCache> dense_forward(const Tensor& x, const DenseParams& p) {
    require_rank(x, 2, "dense_forward");
    require_rank(p.weights, 2, "dense_forward weights");
    const std::size_t n = x.extent(0), out = p.weights.extent(0);
    if (x.extent(1) != p.weights.extent(1)) {
        throw ShapeError("dense_forward: input width " + std::to_string(x.extent(1)) + " does not match weights " +
                         to_string(p.weights.shape()));
    }
    require_shape(p.bias, {out}, "dense_forward bias");

    Tensor y = gemm(x, Transpose::No, p.weights, Transpose::Yes);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t o = 0; o < out; ++o) y.at(r, o) += p.bias[o];
    return {std::move(y), DenseCache{x}};
}

DenseGrads dense_backward(const Tensor& dy, const DenseCache& cache, const DenseParams& p) {
    require_shape(dy, {cache.input.extent(0), p.weights.extent(0)}, "dense_backward dy");
    DenseGrads g;
    g.dx = matmul(dy, p.weights);
    g.dweights = gemm(dy, Transpose::Yes, cache.input, Transpose::No);
    g.dbias = sum_axis(dy, 0);
    return g;
}

// ---------------------------------------------------------------------------
// Softmax

Tensor softmax(const Tensor& logits) {
    require_rank(logits, 2, "softmax");
    if (!all_finite(logits)) throw NumericError("softmax: non-finite logits");
    const std::size_t n = logits.extent(0), k = logits.extent(1);
    Tensor probs(logits.shape());
    for (std::size_t r = 0; r < n; ++r) {
        Scalar mx = logits.at(r, 0);
        for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, logits.at(r, c));
        Scalar total = 0;
        for (std::size_t c = 0; c < k; ++c) {
            const Scalar e = std::exp(logits.at(r, c) - mx);
            probs.at(r, c) = e;
            total += e;
        }
        for (std::size_t c = 0; c < k; ++c) probs.at(r, c) /= total;
    }
    return probs;
}

}  // namespace hemocnn
