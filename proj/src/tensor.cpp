#include "hemocnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hemocnn/errors.hpp"
#include "hemocnn/rng.hpp"

namespace hemocnn {

std::string to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::size_t shape_volume(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_extents(const Shape& shape) {
    for (auto e : shape) {
        if (e == 0) throw ShapeError("zero extent in shape " + to_string(shape));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
    }
}

}  // namespace

Tensor::Tensor(Shape shape, Fill fill) : shape_(std::move(shape)) {
    check_extents(shape_);
    data_.assign(shape_volume(shape_), fill.kind == Fill::Kind::Constant ? fill.value : Scalar{0});
    if (fill.kind == Fill::Kind::Uniform) {
        CounterRng rng(fill.seed);
        for (auto& v : data_) v = static_cast<Scalar>(rng.uniform(fill.lo, fill.hi));
    }
}

Tensor::Tensor(Shape shape, std::vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents(shape_);
    if (data_.size() != shape_volume(shape_)) {
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         to_string(shape_));
    }
}

Tensor Tensor::from(std::initializer_list<Scalar> values) {
    return Tensor({values.size()}, std::vector<Scalar>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<Scalar>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<Scalar> data;
    data.reserve(m * n);
    for (const auto& r : rows) {
        if (r.size() != n) throw ShapeError("ragged matrix literal");
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({m, n}, std::move(data));
}

Tensor Tensor::reshaped(Shape shape) const {
    check_extents(shape);
    if (shape_volume(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

void Tensor::fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

Tensor gemm(const Tensor& a, Transpose ta, const Tensor& b, Transpose tb) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("gemm: operands must be rank 2, got " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
    }
    const bool at = ta == Transpose::Yes;
    const bool bt = tb == Transpose::Yes;
    const std::size_t m = at ? a.extent(1) : a.extent(0);
    const std::size_t k = at ? a.extent(0) : a.extent(1);
    const std::size_t kb = bt ? b.extent(1) : b.extent(0);
    const std::size_t n = bt ? b.extent(0) : b.extent(1);
    if (k != kb) {
        throw ShapeError("gemm: inner dimension mismatch " + to_string(a.shape()) + " x " + to_string(b.shape()));
    }

    Tensor c({m, n});
    auto C = c.data();
    auto A = a.data();
    auto B = b.data();
    const std::size_t lda = a.extent(1);
    const std::size_t ldb = b.extent(1);

    if (!bt) {
        // i-p-j order keeps the innermost loop contiguous in B and C.
        for (std::size_t i = 0; i < m; ++i) {
            Scalar* crow = &C[i * n];
            for (std::size_t p = 0; p < k; ++p) {
                const Scalar aip = at ? A[p * lda + i] : A[i * lda + p];
                if (aip == Scalar{0}) continue;
                const Scalar* brow = &B[p * ldb];
                for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
            }
        }
    } else {
        // B transposed: rows of B are contiguous along k, so use dot products.
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const Scalar* brow = &B[j * ldb];
                Scalar acc = 0;
                if (at) {
                    for (std::size_t p = 0; p < k; ++p) acc += A[p * lda + i] * brow[p];
                } else {
                    const Scalar* arow = &A[i * lda];
                    for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
                }
                C[i * n + j] = acc;
            }
        }
    }
    return c;
}

Tensor matmul(const Tensor& a, const Tensor& b) { return gemm(a, Transpose::No, b, Transpose::No); }

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: rank must be 2, got " + to_string(a.shape()));
    const std::size_t m = a.extent(0), n = a.extent(1);
    Tensor t({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
    return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
    return c;
}

Tensor scalar_map(const Tensor& a, const std::function<Scalar(Scalar)>& f) {
    Tensor c = a;
    for (auto& v : c.data()) v = f(v);
    return c;
}

namespace {

// Splits a shape around `axis` into (outer, length, inner) strides.
struct AxisSplit {
    std::size_t outer, length, inner;
};

AxisSplit split_axis(const Tensor& a, std::size_t axis, const char* op) {
    if (axis >= a.rank()) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(a.shape()));
    }
    const auto& s = a.shape();
    AxisSplit r{1, s[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

}  // namespace

Tensor sum_axis(const Tensor& a, std::size_t axis) {
    const auto [outer, length, inner] = split_axis(a, axis, "sum_axis");
    Shape out_shape;
    for (std::size_t i = 0; i < a.rank(); ++i)
        if (i != axis) out_shape.push_back(a.extent(i));
    if (out_shape.empty()) out_shape.push_back(1);

    Tensor out(out_shape);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t l = 0; l < length; ++l)
            for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += a[(o * length + l) * inner + i];
    return out;
}

std::vector<std::size_t> argmax_axis(const Tensor& a, std::size_t axis) {
    const auto [outer, length, inner] = split_axis(a, axis, "argmax_axis");
    std::vector<std::size_t> out(outer * inner, 0);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            std::size_t best = 0;
            Scalar best_v = a[o * length * inner + i];
            for (std::size_t l = 1; l < length; ++l) {
                const Scalar v = a[(o * length + l) * inner + i];
                if (v > best_v) {
                    best_v = v;
                    best = l;
                }
            }
            out[o * inner + i] = best;
        }
    }
    return out;
}

Scalar sum(const Tensor& a) {
    Scalar s = 0;
    for (auto v : a.data()) s += v;
    return s;
}

Scalar dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    Scalar s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

bool all_finite(const Tensor& a) {
    return std::all_of(a.data().begin(), a.data().end(), [](Scalar v) { return std::isfinite(v); });
}

Tensor im2col(std::span<const Scalar> image, std::size_t channels, std::size_t height, std::size_t width) {
    if (channels == 0 || height == 0 || width == 0) throw ShapeError("im2col: empty image");
    if (image.size() != channels * height * width) throw ShapeError("im2col: image size does not match C*H*W");

    const std::size_t hw = height * width;
    Tensor cols({channels * 9, hw});
    auto out = cols.data();
    for (std::size_t c = 0; c < channels; ++c) {
        const Scalar* plane = &image[c * hw];
        for (std::size_t u = 0; u < 3; ++u) {
            for (std::size_t v = 0; v < 3; ++v) {
                Scalar* row = &out[(c * 9 + u * 3 + v) * hw];
                for (std::size_t i = 0; i < height; ++i) {
                    const auto si = static_cast<std::ptrdiff_t>(i + u) - 1;
                    if (si < 0 || si >= static_cast<std::ptrdiff_t>(height)) continue;
                    for (std::size_t j = 0; j < width; ++j) {
                        const auto sj = static_cast<std::ptrdiff_t>(j + v) - 1;
                        if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(width)) continue;
                        row[i * width + j] = plane[static_cast<std::size_t>(si) * width + static_cast<std::size_t>(sj)];
                    }
                }
            }
        }
    }
    return cols;
}

Tensor im2col(const Tensor& image) {
    if (image.rank() != 3) throw ShapeError("im2col: expected [C,H,W], got " + to_string(image.shape()));
    return im2col(image.data(), image.extent(0), image.extent(1), image.extent(2));
}

void col2im(const Tensor& cols, std::size_t channels, std::size_t height, std::size_t width,
            std::span<Scalar> image) {
    const std::size_t hw = height * width;
    if (cols.rank() != 2 || cols.extent(0) != channels * 9 || cols.extent(1) != hw) {
        throw ShapeError("col2im: column matrix " + to_string(cols.shape()) + " does not match image " +
                         to_string({channels, height, width}));
    }
    if (image.size() != channels * hw) throw ShapeError("col2im: output buffer size mismatch");

    std::fill(image.begin(), image.end(), Scalar{0});
    auto in = cols.data();
    for (std::size_t c = 0; c < channels; ++c) {
        Scalar* plane = &image[c * hw];
        for (std::size_t u = 0; u < 3; ++u) {
            for (std::size_t v = 0; v < 3; ++v) {
                const Scalar* row = &in[(c * 9 + u * 3 + v) * hw];
                for (std::size_t i = 0; i < height; ++i) {
                    const auto si = static_cast<std::ptrdiff_t>(i + u) - 1;
                    if (si < 0 || si >= static_cast<std::ptrdiff_t>(height)) continue;
                    for (std::size_t j = 0; j < width; ++j) {
                        const auto sj = static_cast<std::ptrdiff_t>(j + v) - 1;
                        if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(width)) continue;
                        plane[static_cast<std::size_t>(si) * width + static_cast<std::size_t>(sj)] += row[i * width + j];
                    }
                }
            }
        }
    }
}

Tensor col2im(const Tensor& cols, std::size_t channels, std::size_t height, std::size_t width) {
    Tensor image({channels, height, width});
    col2im(cols, channels, height, width, image.data());
    return image;
}

}  // namespace hemocnn
