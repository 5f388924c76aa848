#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cfr/grad_check.hpp"
#include "cfr/rng.hpp"
#include "cfr/tensor.hpp"

using namespace cfr;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = false) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    std::vector<double> d(n);
    for (double& v : d) v = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

// Independent quadruple-loop cross-correlation used as the conv2d oracle.
std::vector<double> naive_conv(const std::vector<double>& x, int cin, int h, int w,
                               const std::vector<double>& wt, int cout, int kh, int kw,
                               const std::vector<double>& b, int stride, int pad) {
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (w + 2 * pad - kw) / stride + 1;
    std::vector<double> out(static_cast<std::size_t>(cout) * ho * wo, 0.0);
    for (int co = 0; co < cout; ++co)
        for (int oh = 0; oh < ho; ++oh)
            for (int ow = 0; ow < wo; ++ow) {
                double acc = b[static_cast<std::size_t>(co)];
                for (int ci = 0; ci < cin; ++ci)
                    for (int i = 0; i < kh; ++i)
                        for (int j = 0; j < kw; ++j) {
                            const int hi = oh * stride + i - pad;
                            const int wi = ow * stride + j - pad;
                            if (hi < 0 || hi >= h || wi < 0 || wi >= w) continue;
                            acc += x[static_cast<std::size_t>((ci * h + hi) * w + wi)] *
                                   wt[static_cast<std::size_t>(((co * cin + ci) * kh + i) * kw + j)];
                        }
                out[static_cast<std::size_t>((co * ho + oh) * wo + ow)] = acc;
            }
    return out;
}

}  // namespace

TEST_CASE("conv2d identity kernel passes input through", "[tensor]") {
    Rng rng(7);
    Tensor x = random_tensor({1, 5, 5}, rng, 0.0, 1.0);
    Tensor w({1, 1, 1, 1}, {1.0});
    Tensor b({1}, {0.0});
    Tensor y = conv2d(x, w, b, 1, 0);
    REQUIRE(y.shape() == std::vector<int>{1, 5, 5});
    REQUIRE(y.data() == x.data());
}

TEST_CASE("conv2d zero input yields bias per channel", "[tensor]") {
    Tensor x = Tensor::zeros({2, 4, 4});
    Tensor w = Tensor::zeros({3, 2, 3, 3});
    Tensor b({3}, {0.5, -1.0, 2.0});
    Tensor y = conv2d(x, w, b, 1, 1);
    REQUIRE(y.shape() == std::vector<int>{3, 4, 4});
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 16; ++i) REQUIRE(y[static_cast<std::size_t>(c * 16 + i)] == b[static_cast<std::size_t>(c)]);
}

TEST_CASE("conv2d 3x3 ones over 4x4 ones gives 2x2 of 9s", "[tensor]") {
    Tensor x = Tensor::full({1, 4, 4}, 1.0);
    Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor b = Tensor::zeros({1});
    Tensor y = conv2d(x, w, b, 1, 0);
    REQUIRE(y.shape() == std::vector<int>{1, 2, 2});
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(y[i] == 9.0);
}

TEST_CASE("conv2d matches naive reference exactly on integer inputs", "[tensor]") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const int cin = 1 + static_cast<int>(rng.below(3));
        const int cout = 1 + static_cast<int>(rng.below(3));
        const int h = 4 + static_cast<int>(rng.below(3));
        const int w = 4 + static_cast<int>(rng.below(3));
        const int k = 1 + 2 * static_cast<int>(rng.below(2));  // 1 or 3
        const int stride = 1 + static_cast<int>(rng.below(2));
        const int pad = static_cast<int>(rng.below(2));
        auto randint = [&rng](std::vector<int> shape) {
            std::size_t n = 1;
            for (int d : shape) n *= static_cast<std::size_t>(d);
            std::vector<double> v(n);
            for (double& x : v) x = static_cast<double>(static_cast<int>(rng.below(7)) - 3);
            return Tensor(std::move(shape), std::move(v));
        };
        Tensor x = randint({cin, h, w});
        Tensor wt = randint({cout, cin, k, k});
        Tensor b = randint({cout});
        Tensor y = conv2d(x, wt, b, stride, pad);
        auto ref = naive_conv(x.data(), cin, h, w, wt.data(), cout, k, k, b.data(), stride, pad);
        REQUIRE(y.data() == ref);
    }
}

TEST_CASE("conv2d rejects channel mismatch", "[tensor]") {
    Tensor x = Tensor::zeros({2, 4, 4});
    Tensor w = Tensor::zeros({1, 3, 3, 3});
    Tensor b = Tensor::zeros({1});
    REQUIRE_THROWS_AS(conv2d(x, w, b, 1, 0), dimension_error);
}

TEST_CASE("relu forward and subgradient", "[tensor]") {
    Tensor x({3}, {-1.0, 0.0, 2.0}, true);
    Tensor y = relu(x);
    REQUIRE(y.data() == std::vector<double>{0.0, 0.0, 2.0});

    Tensor x2({2}, {-1.0, 3.0}, true);
    backward(sum(relu(x2)));
    REQUIRE(x2.grad() == std::vector<double>{0.0, 1.0});

    Tensor x3 = Tensor::full({4}, -0.5, true);
    Tensor y3 = relu(x3);
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(y3[i] == 0.0);
    backward(sum(y3));
    REQUIRE(x3.grad() == std::vector<double>(4, 0.0));
}

TEST_CASE("maxpool basics and tie-break", "[tensor]") {
    Tensor x({1, 2, 2}, {1.0, 2.0, 3.0, 4.0}, true);
    Tensor y = maxpool2d(x, 2, 2);
    REQUIRE(y.size() == 1);
    REQUIRE(y[0] == 4.0);

    Tensor c = Tensor::full({1, 4, 4}, 2.5, true);
    Tensor yc = maxpool2d(c, 2, 2);
    for (std::size_t i = 0; i < yc.size(); ++i) REQUIRE(yc[i] == 2.5);
    backward(sum(yc));
    // Gradient concentrates on the first (row-major) element of each window.
    const auto& g = c.grad();
    for (int oh = 0; oh < 2; ++oh)
        for (int ow = 0; ow < 2; ++ow)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    const double expect = (i == 0 && j == 0) ? 1.0 : 0.0;
                    REQUIRE(g[static_cast<std::size_t>((oh * 2 + i) * 4 + ow * 2 + j)] == expect);
                }
}

TEST_CASE("maxpool gradient matches finite differences", "[tensor]") {
    Rng rng(21);
    Tensor x = random_tensor({1, 4, 4}, rng, 0.0, 1.0, true);
    auto f = [](const Tensor& t) { return sum(maxpool2d(t, 2, 2)); };
    REQUIRE(grad_check(f, x, 1e-5) < 1e-6);
}

TEST_CASE("linear basics", "[tensor]") {
    Tensor w_id({2, 2}, {1.0, 0.0, 0.0, 1.0});
    Tensor b0 = Tensor::zeros({2});
    Tensor x({2}, {3.0, -4.0});
    REQUIRE(linear(x, w_id, b0).data() == x.data());

    Tensor wz = Tensor::zeros({2, 2});
    Tensor b({2}, {1.0, 2.0});
    REQUIRE(linear(x, wz, b).data() == b.data());

    Tensor w({2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor ones({2}, {1.0, 1.0});
    REQUIRE(linear(ones, w, b0).data() == std::vector<double>{3.0, 7.0});

    Tensor bad({3}, {1.0, 2.0, 3.0});
    REQUIRE_THROWS_AS(linear(bad, w, b0), dimension_error);
}

TEST_CASE("softmax basics", "[tensor]") {
    Tensor uniform = Tensor::zeros({4});
    Tensor s = softmax(uniform);
    for (std::size_t i = 0; i < 4; ++i) REQUIRE(s[i] == Catch::Approx(0.25).margin(1e-15));

    Rng rng(5);
    Tensor z = random_tensor({6}, rng, -3.0, 3.0);
    Tensor z_shift = z;
    std::vector<double> shifted = z.data();
    for (double& v : shifted) v += 13.5;
    Tensor s1 = softmax(z);
    Tensor s2 = softmax(Tensor({6}, shifted));
    double total = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
        REQUIRE(s1[i] == Catch::Approx(s2[i]).margin(1e-14));
        REQUIRE(s1[i] > 0.0);
        total += s1[i];
    }
    REQUIRE(std::abs(total - 1.0) < 1e-12);

    Tensor z2({2}, {0.0, std::log(2.0)});
    Tensor s3 = softmax(z2);
    REQUIRE(s3[0] == Catch::Approx(1.0 / 3.0).margin(1e-15));
    REQUIRE(s3[1] == Catch::Approx(2.0 / 3.0).margin(1e-15));
}

TEST_CASE("backward on sum of squares gives 2x", "[tensor]") {
    Tensor x({3}, {1.0, -2.0, 0.5}, true);
    backward(sum(mul(x, x)));
    REQUIRE(x.grad() == std::vector<double>{2.0, -4.0, 1.0});
}

TEST_CASE("backward requires scalar root", "[tensor]") {
    Tensor x({2}, {1.0, 2.0}, true);
    Tensor y = mul(x, x);
    REQUIRE_THROWS_AS(backward(y), contract_error);
}

TEST_CASE("disconnected tensor keeps zero grad", "[tensor]") {
    Tensor x({2}, {1.0, 2.0}, true);
    Tensor unrelated({2}, {5.0, 5.0}, true);
    backward(sum(mul(x, x)));
    REQUIRE(unrelated.grad() == std::vector<double>(2, 0.0));
}

TEST_CASE("backward sums contributions over shared subexpressions", "[tensor]") {
    // y = s + s with s = sum(x): grad must be 2, matching the duplicated
    // subgraph y' = sum(x) + sum(x) computed on an independent tape.
    Tensor x({3}, {1.0, 2.0, 3.0}, true);
    Tensor s = sum(x);
    backward(add(s, s));
    const std::vector<double> shared = x.grad();

    Tensor x2({3}, {1.0, 2.0, 3.0}, true);
    backward(add(sum(x2), sum(x2)));
    REQUIRE(shared == x2.grad());
    REQUIRE(shared == std::vector<double>(3, 2.0));
}

TEST_CASE("conv2d gradients match finite differences", "[tensor]") {
    Rng rng(31);
    Tensor x = random_tensor({2, 5, 5}, rng, -1.0, 1.0, true);
    Tensor w = random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5, true);
    Tensor b = random_tensor({3}, rng, -0.5, 0.5, true);

    auto fw = [&](const Tensor& t) { return sum(conv2d(x, t, b, 1, 1)); };
    Tensor wcopy = w;
    REQUIRE(grad_check(fw, wcopy, 1e-5) < 1e-5);

    auto fx = [&](const Tensor& t) { return sum(mul(conv2d(t, w, b, 2, 0), conv2d(t, w, b, 2, 0))); };
    Tensor xcopy = x;
    REQUIRE(grad_check(fx, xcopy, 1e-5) < 1e-5);
}

TEST_CASE("grad_check on linear map is exact up to float noise", "[tensor]") {
    Rng rng(41);
    Tensor x = random_tensor({8}, rng, -1.0, 1.0, true);
    auto f = [](const Tensor& t) { return sum(t); };
    REQUIRE(grad_check(f, x, 1e-5) < 1e-9);
}

TEST_CASE("grad_check avoids relu kink when inputs are away from zero", "[tensor]") {
    Rng rng(43);
    std::vector<double> d(10);
    for (double& v : d) {
        v = rng.uniform(0.1, 1.0) * (rng.below(2) == 0 ? 1.0 : -1.0);  // none within h of 0
    }
    Tensor x({10}, d, true);
    auto f = [](const Tensor& t) { return sum(relu(t)); };
    REQUIRE(grad_check(f, x, 1e-5) < 1e-6);
}

TEST_CASE("elementwise op gradients match finite differences", "[tensor]") {
    Rng rng(53);
    auto check = [&rng](auto make, double lo, double hi, double tol) {
        Tensor x = random_tensor({6}, rng, lo, hi, true);
        auto f = [&make](const Tensor& t) { return make(t); };
        REQUIRE(grad_check(f, x, 1e-5) < tol);
    };
    check([](const Tensor& t) { return sum(mul(t, t)); }, -1.0, 1.0, 1e-7);
    check([](const Tensor& t) { return sum(log(t)); }, 0.5, 2.0, 1e-7);
    check([](const Tensor& t) { return sum(cfr::sqrt(t)); }, 0.5, 2.0, 1e-7);
    check([](const Tensor& t) { return sum(reciprocal(t)); }, 0.5, 2.0, 1e-7);
    check([](const Tensor& t) { return mean(sub(scale(t, 3.0), t)); }, -1.0, 1.0, 1e-7);
    check([](const Tensor& t) { return pick(softmax(t), 1); }, -2.0, 2.0, 1e-7);
}

TEST_CASE("tape topological order places parents first", "[tensor]") {
    Tensor x({2}, {1.0, 2.0}, true);
    Tensor s = sum(mul(x, x));
    Tape tape = record_tape(s);
    REQUIRE(tape.nodes.size() == 3);
    for (std::size_t i = 0; i < tape.nodes.size(); ++i)
        for (const auto& p : tape.nodes[i]->parents) {
            if (!p->requires_grad) continue;
            bool seen = false;
            for (std::size_t j = 0; j < i; ++j) seen = seen || tape.nodes[j] == p.get();
            REQUIRE(seen);
        }
}

TEST_CASE("tensor shape/data length must agree", "[tensor]") {
    REQUIRE_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), dimension_error);
}
