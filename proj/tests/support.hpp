#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include "hemocnn/rng.hpp"
#include "hemocnn/tensor.hpp"

namespace testing {

namespace fs = std::filesystem;
using hemocnn::Scalar;
using hemocnn::Shape;
using hemocnn::Tensor;

/// Scratch directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("hemocnn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
    fs::path path_;
};

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

inline Tensor random_tensor(Shape shape, std::uint64_t key, Scalar lo = -1, Scalar hi = 1) {
    return Tensor(std::move(shape), hemocnn::Fill::uniform(lo, hi, key));
}

inline double rel_error(double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

/// Central-difference gradient of a scalar function with respect to every
/// entry of `x` (x is perturbed in place and restored).
inline Tensor numeric_grad(Tensor& x, const std::function<double()>& f, double eps = 1e-5) {
    Tensor g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Scalar saved = x[i];
        x[i] = saved + eps;
        const double up = f();
        x[i] = saved - eps;
        const double down = f();
        x[i] = saved;
        g[i] = static_cast<Scalar>((up - down) / (2 * eps));
    }
    return g;
}

inline double max_rel_error(const Tensor& analytic, const Tensor& numeric) {
    double worst = 0;
    for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, rel_error(analytic[i], numeric[i]));
    return worst;
}

/// Direct 3x3 same-padded convolution, no im2col.
inline Tensor reference_conv(const Tensor& x, const Tensor& k, const Tensor& b) {
    const std::size_t n = x.extent(0), cin = x.extent(1), h = x.extent(2), w = x.extent(3);
    const std::size_t cout = k.extent(0);
    Tensor y({n, cout, h, w});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j) {
                    double acc = b[o];
                    for (std::size_t c = 0; c < cin; ++c)
                        for (std::size_t u = 0; u < 3; ++u)
                            for (std::size_t v = 0; v < 3; ++v) {
                                const long si = long(i) + long(u) - 1, sj = long(j) + long(v) - 1;
                                if (si < 0 || sj < 0 || si >= long(h) || sj >= long(w)) continue;
                                acc += x.at(s, c, std::size_t(si), std::size_t(sj)) * k.at(o, c, u, v);
                            }
                    y.at(s, o, i, j) = static_cast<Scalar>(acc);
                }
    return y;
}

}  // namespace testing
