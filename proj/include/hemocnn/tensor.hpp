#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hemocnn {

#if defined(HEMOCNN_SINGLE_PRECISION) && HEMOCNN_SINGLE_PRECISION
using Scalar = float;
#else
using Scalar = double;
#endif

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

/// Number of elements described by a shape (1 for rank 0).
std::size_t shape_volume(const Shape& shape);

/// Describes how a new tensor is filled.
struct Fill {
    enum class Kind { Constant, Uniform };

    Kind kind = Kind::Constant;
    Scalar value = 0;
    Scalar lo = 0;
    Scalar hi = 1;
    std::uint64_t seed = 0;

    static Fill constant(Scalar v) { return {Kind::Constant, v, 0, 0, 0}; }
    static Fill uniform(Scalar lo, Scalar hi, std::uint64_t seed) { return {Kind::Uniform, 0, lo, hi, seed}; }
};

/// Dense row-major tensor. Image data is channel-first: [N, C, H, W].
class Tensor {
public:
    Tensor() = default;

    /// Throws ShapeError if any extent is zero.
    explicit Tensor(Shape shape, Fill fill = Fill::constant(0));
    Tensor(Shape shape, std::vector<Scalar> data);

    static Tensor from(std::initializer_list<Scalar> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<Scalar>> rows);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<Scalar> data() noexcept { return data_; }
    std::span<const Scalar> data() const noexcept { return data_; }
    const std::vector<Scalar>& values() const noexcept { return data_; }

    Scalar& operator[](std::size_t i) noexcept { return data_[i]; }
    Scalar operator[](std::size_t i) const noexcept { return data_[i]; }

    Scalar& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    Scalar at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    Scalar& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    Scalar at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }

    /// Same data, new shape of equal volume.
    Tensor reshaped(Shape shape) const;

    void fill(Scalar v);

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<Scalar> data_;
};

enum class Transpose { No, Yes };

/// c = op(a) * op(b). Both operands rank 2.
Tensor gemm(const Tensor& a, Transpose ta, const Tensor& b, Transpose tb);

/// Standard matrix product [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_map(const Tensor& a, const std::function<Scalar(Scalar)>& f);

/// Sum along one axis; the axis is removed from the result shape
/// (a rank-1 input reduces to shape [1]).
Tensor sum_axis(const Tensor& a, std::size_t axis);

/// Index of the maximum along an axis, lowest index on ties.
std::vector<std::size_t> argmax_axis(const Tensor& a, std::size_t axis);

Scalar sum(const Tensor& a);
Scalar dot(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& a);

/// Gathers 3x3 stride-1 'same' receptive fields of a [C,H,W] image into a
/// [C*9, H*W] matrix. Row (c*9 + u*3 + v), column (i*W + j) holds
/// x[c, i+u-1, j+v-1], or 0 outside the image.
Tensor im2col(std::span<const Scalar> image, std::size_t channels, std::size_t height, std::size_t width);
Tensor im2col(const Tensor& image);

/// Adjoint of im2col: scatter-adds columns back onto a [C,H,W] image.
void col2im(const Tensor& cols, std::size_t channels, std::size_t height, std::size_t width,
            std::span<Scalar> image);
Tensor col2im(const Tensor& cols, std::size_t channels, std::size_t height, std::size_t width);

}  // namespace hemocnn
