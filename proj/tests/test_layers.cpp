#include "doctest.h"

#include <cmath>

#include "hemocnn/errors.hpp"
#include "hemocnn/layers.hpp"
#include "hemocnn/loss.hpp"
#include "support.hpp"

using namespace hemocnn;
using testing::max_rel_error;
using testing::numeric_grad;
using testing::random_tensor;

namespace {

// Scalar probe loss L = <y, r> so that dL/dy = r.
double probe(const Tensor& y, const Tensor& r) { return dot(y, r); }

ConvParams random_conv(std::size_t cout, std::size_t cin, std::uint64_t key) {
    return {random_tensor({cout, cin, 3, 3}, key), random_tensor({cout}, key + 1)};
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("conv2d forward examples") {
    SUBCASE("identity kernel") {
        Tensor k({1, 1, 3, 3});
        k.at(0, 0, 1, 1) = 1;
        const auto x = random_tensor({2, 1, 4, 5}, 3);
        CHECK(conv2d_forward(x, {k, Tensor({1})}).first == x);
    }
    SUBCASE("all-ones counts neighbours") {
        const auto [y, cache] =
            conv2d_forward(Tensor({1, 1, 3, 3}, Fill::constant(1)), {Tensor({1, 1, 3, 3}, Fill::constant(1)), Tensor({1})});
        CHECK(y.values() == std::vector<Scalar>{4, 6, 4, 6, 9, 6, 4, 6, 4});
    }
    SUBCASE("zero kernels give the bias") {
        const auto y = conv2d_forward(random_tensor({1, 2, 3, 3}, 5), {Tensor({3, 2, 3, 3}), Tensor::from({1, -2, 0.5})}).first;
        for (std::size_t o = 0; o < 3; ++o)
            for (std::size_t i = 0; i < 9; ++i) CHECK(y[o * 9 + i] == Tensor::from({1, -2, 0.5})[o]);
    }
    CHECK_THROWS_AS(conv2d_forward(Tensor({1, 2, 3, 3}), random_conv(1, 3, 1)), ShapeError);
}

TEST_CASE("im2col convolution matches the direct loop") {
    CounterRng rng(derive_key({42}));
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.below(2), cin = 1 + rng.below(3), cout = 1 + rng.below(3);
        const std::size_t h = 1 + rng.below(5), w = 1 + rng.below(5);
        const auto x = random_tensor({n, cin, h, w}, rng.next_u64());
        const auto p = random_conv(cout, cin, rng.next_u64());
        const auto got = conv2d_forward(x, p).first;
        const auto ref = testing::reference_conv(x, p.kernels, p.bias);
        REQUIRE(got.shape() == ref.shape());
        CHECK(max_rel_error(got, ref) <= 1e-9);
    }
}

TEST_CASE("conv2d backward") {
    SUBCASE("zero upstream gradient") {
        const auto p = random_conv(2, 2, 7);
        const auto [y, cache] = conv2d_forward(random_tensor({1, 2, 3, 3}, 1), p);
        const auto g = conv2d_backward(Tensor(y.shape()), cache, p);
        CHECK(g.dx == Tensor(g.dx.shape()));
        CHECK(g.dkernels == Tensor(g.dkernels.shape()));
        CHECK(g.dbias == Tensor(g.dbias.shape()));
    }
    SUBCASE("identity kernel passes dy through") {
        Tensor k({1, 1, 3, 3});
        k.at(0, 0, 1, 1) = 1;
        const auto [y, cache] = conv2d_forward(random_tensor({1, 1, 4, 4}, 2), {k, Tensor({1})});
        const auto dy = random_tensor(y.shape(), 3);
        CHECK(conv2d_backward(dy, cache, {k, Tensor({1})}).dx == dy);
    }
    SUBCASE("finite differences") {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            auto x = random_tensor({2, 2, 4, 3}, 10 + seed);
            auto p = random_conv(3, 2, 20 + seed);
            const auto r = random_tensor({2, 3, 4, 3}, 30 + seed);
            const auto [y, cache] = conv2d_forward(x, p);
            const auto g = conv2d_backward(r, cache, p);
            auto f = [&] { return probe(conv2d_forward(x, p).first, r); };
            CHECK(max_rel_error(g.dx, numeric_grad(x, f)) <= 1e-4);
            CHECK(max_rel_error(g.dkernels, numeric_grad(p.kernels, f)) <= 1e-4);
            CHECK(max_rel_error(g.dbias, numeric_grad(p.bias, f)) <= 1e-4);
        }
    }
}

// ---------------------------------------------------------------------------

TEST_CASE("maxpool forward examples") {
    const PoolOptions s1{1, false};
    CHECK(maxpool2d_forward(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}), s1).first.values() == std::vector<Scalar>{4});
    CHECK(maxpool2d_forward(Tensor({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}), s1).first.values() ==
          std::vector<Scalar>{5, 6, 8, 9});

    const auto c = maxpool2d_forward(Tensor({1, 2, 5, 5}, Fill::constant(3)), PoolOptions{2, true}).first;
    CHECK(c.shape() == Shape{1, 2, 3, 3});
    CHECK(c == Tensor({1, 2, 3, 3}, Fill::constant(3)));

    // First maximum wins ties; the gradient goes to the top-left entry.
    const auto [y, cache] = maxpool2d_forward(Tensor({1, 1, 2, 2}, Fill::constant(1)), s1);
    CHECK(maxpool2d_backward(Tensor({1, 1, 1, 1}, {2}), cache).values() == std::vector<Scalar>{2, 0, 0, 0});
}

TEST_CASE("maxpool output extents") {
    for (std::size_t h = 1; h <= 64; ++h) {
        CHECK(pool_output_extent(h, {2, true}) == (h + 1) / 2);
        CHECK(pool_output_extent(h, {1, true}) == h);
        CHECK(pool_output_extent(h, {2, false}) == (h >= 2 ? (h - 2) / 2 + 1 : 0));
        CHECK(pool_output_extent(h, {1, false}) == (h >= 2 ? h - 1 : 0));
    }
    CHECK_THROWS_AS(maxpool2d_forward(Tensor({1, 1, 1, 1}), {2, false}, "block7.pool"), ConfigError);
    CHECK_THROWS_WITH(maxpool2d_forward(Tensor({1, 1, 1, 1}), {2, false}, "block7.pool"),
                      doctest::Contains("block7"));
    CHECK_THROWS_AS(maxpool2d_forward(Tensor({1, 1, 4, 4}), {3, true}), ConfigError);
}

TEST_CASE("maxpool backward") {
    const auto [y, cache] = maxpool2d_forward(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}), {1, false});
    CHECK(maxpool2d_backward(Tensor({1, 1, 1, 1}, {5}), cache).values() == std::vector<Scalar>{0, 0, 0, 5});
    CHECK(maxpool2d_backward(Tensor({1, 1, 1, 1}), cache) == Tensor({1, 1, 2, 2}));

    for (const PoolOptions opts : {PoolOptions{1, false}, PoolOptions{2, false}, PoolOptions{2, true}}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            auto x = random_tensor({2, 2, 5, 5}, 40 + seed);
            const auto [y2, c2] = maxpool2d_forward(x, opts);
            if (c2.min_gap < 1e-3) continue;  // too close to a tie for finite differences
            const auto r = random_tensor(y2.shape(), 50 + seed);
            const auto dx = maxpool2d_backward(r, c2);
            CHECK(max_rel_error(dx, numeric_grad(x, [&] { return probe(maxpool2d_forward(x, opts).first, r); })) <=
                  1e-4);
        }
    }
}

// ---------------------------------------------------------------------------

TEST_CASE("relu") {
    const auto [y, cache] = relu_forward(Tensor::from({-1, 0, 2}));
    CHECK(y == Tensor::from({0, 0, 2}));
    CHECK(relu_backward(Tensor::from({1, 1, 1}), cache) == Tensor::from({0, 0, 1}));

    const auto pos = random_tensor({6}, 1, 0.5, 2);
    const auto [yp, cp] = relu_forward(pos);
    CHECK(yp == pos);
    const auto dy = random_tensor({6}, 2);
    CHECK(relu_backward(dy, cp) == dy);

    auto x = random_tensor({3, 7}, 3);
    for (auto& v : x.data())
        if (std::abs(v) < 1e-3) v = 0.5;  // keep away from the kink
    const auto r = random_tensor({3, 7}, 4);
    const auto dx = relu_backward(r, relu_forward(x).second);
    CHECK(max_rel_error(dx, numeric_grad(x, [&] { return probe(relu_forward(x).first, r); })) <= 1e-4);
}

TEST_CASE("dropout") {
    const auto x = random_tensor({4, 5}, 1);
    CHECK(dropout_forward(x, 0, Mode::Train, 1).first == x);
    CHECK(dropout_forward(x, 0.25, Mode::Infer, 1).first == x);
    CHECK(dropout_forward(x, 0.9, Mode::Infer, 1).first == x);
    CHECK_THROWS_AS(dropout_forward(x, 1.0, Mode::Train, 1), ConfigError);
    CHECK_THROWS_AS(dropout_forward(x, -0.1, Mode::Train, 1), ConfigError);

    SUBCASE("kept fraction and scale") {
        const Tensor ones({1000000}, Fill::constant(1));
        const auto [y, cache] = dropout_forward(ones, 0.25, Mode::Train, derive_key({0, 3, 0, 0}));
        std::size_t kept = 0;
        for (auto v : y.data()) {
            if (v != 0) {
                CHECK(v == doctest::Approx(4.0 / 3.0));
                ++kept;
            }
        }
        CHECK(static_cast<double>(kept) / 1e6 == doctest::Approx(0.75).epsilon(0.005));
        CHECK(sum(y) / 1e6 == doctest::Approx(1.0).epsilon(0.005));
    }
    SUBCASE("masks are keyed") {
        const Tensor ones({256}, Fill::constant(1));
        CHECK(dropout_forward(ones, 0.5, Mode::Train, 7).first == dropout_forward(ones, 0.5, Mode::Train, 7).first);
        CHECK(dropout_forward(ones, 0.5, Mode::Train, 7).first != dropout_forward(ones, 0.5, Mode::Train, 8).first);
    }
    SUBCASE("backward applies the same mask") {
        auto xx = random_tensor({3, 6}, 2);
        const auto r = random_tensor({3, 6}, 3);
        const auto [y, cache] = dropout_forward(xx, 0.25, Mode::Train, 11);
        const auto dx = dropout_backward(r, cache);
        CHECK(dx == mul(r, cache.mask));
        CHECK(max_rel_error(dx, numeric_grad(xx, [&] {
                  return probe(dropout_forward(xx, 0.25, Mode::Train, 11).first, r);
              })) <= 1e-4);
    }
}

TEST_CASE("flatten") {
    const Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(flatten(x) == Tensor({1, 4}, {1, 2, 3, 4}));
    CHECK(unflatten(flatten(x), x.shape()) == x);
    const auto big = random_tensor({3, 2, 4, 5}, 1);
    CHECK(flatten(big).shape() == Shape{3, 40});
    CHECK(unflatten(flatten(big), big.shape()) == big);
}

TEST_CASE("dense") {
    CHECK(dense_forward(Tensor::matrix({{1, 2}}), {Tensor::matrix({{3, 4}}), Tensor::from({5})}).first ==
          Tensor::matrix({{16}}));

    const auto x = random_tensor({3, 2}, 1);
    const DenseParams eye{Tensor::matrix({{1, 0}, {0, 1}}), Tensor({2})};
    CHECK(dense_forward(x, eye).first == x);
    const auto dy = random_tensor({3, 2}, 2);
    CHECK(dense_backward(dy, dense_forward(x, eye).second, eye).dx == dy);

    const auto zero = dense_forward(x, {Tensor({2, 2}), Tensor::from({1, -1})}).first;
    CHECK(zero == Tensor::matrix({{1, -1}, {1, -1}, {1, -1}}));

    const auto g0 = dense_backward(Tensor({3, 2}), dense_forward(x, eye).second, eye);
    CHECK(g0.dx == Tensor({3, 2}));
    CHECK(g0.dweights == Tensor({2, 2}));
    CHECK(g0.dbias == Tensor({2}));

    CHECK_THROWS_AS(dense_forward(Tensor({1, 3}), eye), ShapeError);

    auto xx = random_tensor({4, 3}, 5);
    DenseParams p{random_tensor({2, 3}, 6), random_tensor({2}, 7)};
    const auto r = random_tensor({4, 2}, 8);
    const auto g = dense_backward(r, dense_forward(xx, p).second, p);
    auto f = [&] { return probe(dense_forward(xx, p).first, r); };
    CHECK(max_rel_error(g.dx, numeric_grad(xx, f)) <= 1e-4);
    CHECK(max_rel_error(g.dweights, numeric_grad(p.weights, f)) <= 1e-4);
    CHECK(max_rel_error(g.dbias, numeric_grad(p.bias, f)) <= 1e-4);
}

TEST_CASE("softmax") {
    const auto u = softmax(Tensor::matrix({{0, 0, 0}}));
    for (auto v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0));

    const auto big = softmax(Tensor::matrix({{1000, 0}}));
    CHECK(all_finite(big));
    CHECK(big[0] == doctest::Approx(1.0));
    CHECK(big[1] >= 0);
    CHECK(big[1] < 1e-300);

    const auto l2 = softmax(Tensor::matrix({{std::log(2.0), 0}}));
    CHECK(l2[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(l2[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(softmax(Tensor::matrix({{1, INFINITY}})), NumericError);
    CHECK_THROWS_AS(softmax(Tensor::matrix({{std::nan(""), 0}})), NumericError);

    const auto z = random_tensor({50, 7}, 9, -1e4, 1e4);
    const auto p = softmax(z);
    for (std::size_t r = 0; r < 50; ++r) {
        double total = 0;
        for (std::size_t c = 0; c < 7; ++c) {
            CHECK(p.at(r, c) >= 0);
            CHECK(p.at(r, c) <= 1);
            total += p.at(r, c);
        }
        CHECK(std::abs(total - 1) <= 1e-9);
    }
}

TEST_CASE("fused softmax cross-entropy gradient matches finite differences") {
    auto z = random_tensor({4, 5}, 3, -2, 2);
    const std::vector<std::size_t> labels{0, 4, 2, 2};
    const auto dz = sparse_ce_loss(softmax(z), labels).dlogits;
    CHECK(max_rel_error(dz, numeric_grad(z, [&] { return double(sparse_ce_value(softmax(z), labels)); })) <= 1e-4);
}
