#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fd_check.hpp"
#include "texpro/core/rng.hpp"
#include "texpro/tensor/ops.hpp"
#include "texpro/tensor/tensor.hpp"

using namespace texpro;
using tc::Tensor;

namespace {

std::vector<tc::real> random_values(int64_t n, uint64_t seed, double lo = 0.05, double hi = 0.95) {
    Rng rng(seed);
    std::vector<tc::real> v(static_cast<size_t>(n));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST_CASE("elementwise forward") {
    Tensor a = Tensor::constant({2}, {2.0, 3.0});
    Tensor b = Tensor::constant({2}, {4.0, 5.0});
    Tensor m = tc::mul(a, b);
    CHECK(m.data()[0] == doctest::Approx(8.0));
    CHECK(m.data()[1] == doctest::Approx(15.0));

    Tensor s = tc::sub(Tensor::scalar(1.0), a);
    CHECK(s.data()[0] == doctest::Approx(-1.0));
    CHECK(s.data()[1] == doctest::Approx(-2.0));

    CHECK_THROWS(tc::add(Tensor::constant({2}, {1, 2}), Tensor::constant({3}, {1, 2, 3})));
    CHECK_THROWS(tc::add(a, Tensor::constant({2}, {1.0, NAN})));
}

TEST_CASE("product rule gradients") {
    tc::Tape tape;
    Tensor x = Tensor::leaf({1}, {2.0}, tape);
    Tensor y = Tensor::leaf({1}, {3.0}, tape);
    Tensor r = tc::mul(x, y);
    tape.backward(r);
    CHECK(x.grad_at(0) == doctest::Approx(3.0));
    CHECK(y.grad_at(0) == doctest::Approx(2.0));
}

TEST_CASE("backward rejects non-scalar root") {
    tc::Tape tape;
    Tensor x = Tensor::leaf({2}, {1.0, 2.0}, tape);
    Tensor r = tc::mul(x, x);
    CHECK_THROWS(tape.backward(r));
}

TEST_CASE("gradient accumulation across uses") {
    tc::Tape tape;
    Tensor x = Tensor::leaf({1}, {0.7}, tape);
    Tensor sum = tc::add(tc::add(x, x), x);  // 3x
    tape.backward(sum);
    CHECK(x.grad_at(0) == doctest::Approx(3.0));
}

TEST_CASE("off-path leaves keep zero grad") {
    tc::Tape tape;
    Tensor x = Tensor::leaf({1}, {0.5}, tape);
    Tensor y = Tensor::leaf({1}, {0.25}, tape);
    Tensor r = tc::mul(x, x);
    Tensor unused = tc::mul(y, y);
    (void)unused;
    tape.backward(r);
    CHECK(y.grad_at(0) == 0.0);
}

TEST_CASE("replay determinism") {
    tc::Tape tape;
    Tensor x = Tensor::leaf({16}, random_values(16, 11), tape);
    Tensor k = Tensor::constant({1, 1, 3, 3}, random_values(9, 12, -0.5, 0.5));
    Tensor img = tc::reshape(x, {1, 4, 4});
    Tensor out = tc::conv2d(img, k);
    std::vector<tc::real> first = out.data();
    tape.replay();
    CHECK(out.data() == first);  // bit-identical
}

TEST_CASE("conv2d identity kernel") {
    Tensor img = Tensor::constant({1, 4, 4}, random_values(16, 5));
    std::vector<tc::real> kv(9, 0.0);
    kv[4] = 1.0;
    Tensor k = Tensor::constant({1, 1, 3, 3}, kv);
    Tensor out = tc::conv2d(img, k);
    for (size_t i = 0; i < out.data().size(); ++i) CHECK(out.data()[i] == doctest::Approx(img.data()[i]));
}

TEST_CASE("bilinear constant preserved") {
    Tensor img = Tensor::full({1, 4, 4}, 0.7);
    Tensor out = tc::bilinear_resize(img, 2, 2);
    REQUIRE(out.shape() == std::vector<int>{1, 2, 2});
    for (float v : out.data()) CHECK(v == doctest::Approx(0.7));
}

TEST_CASE("matmul forward") {
    Tensor a = Tensor::constant({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::constant({2, 2}, {5, 6, 7, 8});
    Tensor c = tc::matmul(a, b);
    CHECK(c.data()[0] == doctest::Approx(19));
    CHECK(c.data()[1] == doctest::Approx(22));
    CHECK(c.data()[2] == doctest::Approx(43));
    CHECK(c.data()[3] == doctest::Approx(50));
}

TEST_CASE("pixel_unshuffle layout") {
    // 1x4x4 ramp -> 4x2x2
    std::vector<tc::real> v(16);
    for (int i = 0; i < 16; ++i) v[static_cast<size_t>(i)] = tc::real(i);
    Tensor img = Tensor::constant({1, 4, 4}, v);
    Tensor out = tc::pixel_unshuffle(img, 2);
    REQUIRE(out.shape() == std::vector<int>{4, 2, 2});
    // channel 0 holds the (0,0) corner of each 2x2 block
    CHECK(out.data()[0] == 0.0);
    CHECK(out.data()[1] == 2.0);
    CHECK(out.data()[2] == 8.0);
    CHECK(out.data()[3] == 10.0);
}

TEST_CASE("spatial statistics") {
    Tensor img = Tensor::constant({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    CHECK(tc::spatial_mean(img).data()[0] == doctest::Approx(2.5));
    CHECK(tc::spatial_variance(img).data()[0] == doctest::Approx(1.25));
}

TEST_CASE("squash round trip") {
    for (double v : {0.1, 0.25, 0.5, 0.9}) {
        double u = tc::unsquash(v, 0.0, 1.0);
        CHECK(tc::squash(u, 0.0, 1.0) == doctest::Approx(v).epsilon(1e-9));
    }
    CHECK(tc::unsquash(0.5, 0.0, 1.0) == doctest::Approx(0.0));
}

// Every primitive op against central finite differences on random inputs in
// (0.05, 0.95), h = 1e-4, relative error < 1e-3.
TEST_CASE("finite differences: all primitive ops") {
    const double tol = 1e-3, h = 1e-4;

    auto run_binary = [&](const char* name, Tensor (*op)(const Tensor&, const Tensor&),
                          double lo, double hi) {
        tc::Tape tape;
        Tensor a = Tensor::leaf({6}, random_values(6, 101, lo, hi), tape);
        Tensor b = Tensor::leaf({6}, random_values(6, 102, lo, hi), tape);
        Tensor r = tc::mean_all(op(a, b));
        auto res = fd::check(tape, r, {a, b}, h);
        INFO(name << " worst: " << res.worst);
        CHECK(res.max_rel_err < tol);
    };
    run_binary("add", tc::add, 0.05, 0.95);
    run_binary("sub", tc::sub, 0.05, 0.95);
    run_binary("mul", tc::mul, 0.05, 0.95);
    run_binary("div", tc::div, 0.15, 0.95);
    run_binary("pow", tc::pow, 0.25, 0.95);

    {
        tc::Tape tape;
        Tensor x = Tensor::leaf({8}, random_values(8, 103, -1.5, 1.5), tape);
        Tensor r = tc::mean_all(tc::clamp_smooth(x, 0.2, 0.8));
        auto res = fd::check(tape, r, {x}, h);
        INFO("clamp_smooth worst: " << res.worst);
        CHECK(res.max_rel_err < tol);
    }
    {
        tc::Tape tape;
        Tensor x = Tensor::leaf({8}, random_values(8, 104), tape);
        Tensor r = tc::mean_all(tc::exp(x));
        CHECK(fd::check(tape, r, {x}, h).max_rel_err < tol);
    }
    {
        tc::Tape tape;
        Tensor x = Tensor::leaf({8}, random_values(8, 105, 0.3, 0.95), tape);
        Tensor r = tc::mean_all(tc::log(x));
        CHECK(fd::check(tape, r, {x}, h).max_rel_err < tol);
    }
    {
        tc::Tape tape;
        Tensor a = Tensor::leaf({3, 4}, random_values(12, 106), tape);
        Tensor b = Tensor::leaf({4, 2}, random_values(8, 107), tape);
        Tensor r = tc::mean_all(tc::matmul(a, b));
        auto res = fd::check(tape, r, {a, b}, h);
        INFO("matmul worst: " << res.worst);
        CHECK(res.max_rel_err < tol);
    }
    {
        tc::Tape tape;
        Tensor img = Tensor::leaf({2, 5, 5}, random_values(50, 108), tape);
        Tensor ker = Tensor::leaf({3, 2, 3, 3}, random_values(54, 109, -0.4, 0.4), tape);
        Tensor r = tc::mean_all(tc::conv2d(img, ker));
        auto res = fd::check(tape, r, {img, ker}, h);
        INFO("conv2d worst: " << res.worst);
        CHECK(res.max_rel_err < tol);
    }
    {
        tc::Tape tape;
        Tensor img = Tensor::leaf({2, 6, 6}, random_values(72, 110), tape);
        Tensor up = tc::bilinear_resize(img, 9, 9);
        Tensor down = tc::bilinear_resize(up, 3, 3);
        Tensor r = tc::mean_all(down);
        auto res = fd::check(tape, r, {img}, h);
        INFO("bilinear worst: " << res.worst);
        CHECK(res.max_rel_err < tol);
    }
    {
        tc::Tape tape;
        Tensor img = Tensor::leaf({2, 4, 4}, random_values(32, 111), tape);
        Tensor r = tc::mean_all(tc::spatial_mean(img));
        CHECK(fd::check(tape, r, {img}, h).max_rel_err < tol);
    }
    {
        tc::Tape tape;
        Tensor img = Tensor::leaf({2, 4, 4}, random_values(32, 112), tape);
        Tensor r = tc::mean_all(tc::spatial_variance(img));
        auto res = fd::check(tape, r, {img}, h);
        INFO("spatial_variance worst: " << res.worst);
        CHECK(res.max_rel_err < tol);
    }
    {
        tc::Tape tape;
        Tensor img = Tensor::leaf({3, 5, 5}, random_values(75, 113), tape);
        Tensor r = tc::mean_all(tc::gram(img));
        auto res = fd::check(tape, r, {img}, h);
        INFO("gram worst: " << res.worst);
        CHECK(res.max_rel_err < tol);
    }
    {
        tc::Tape tape;
        Tensor img = Tensor::leaf({1, 4, 4}, random_values(16, 114), tape);
        Tensor r = tc::mean_all(tc::pixel_unshuffle(img, 2));
        CHECK(fd::check(tape, r, {img}, h).max_rel_err < tol);
    }
    {
        tc::Tape tape;
        Tensor x = Tensor::leaf({6}, random_values(6, 115), tape);
        Tensor r = tc::mean_all(tc::gather(tc::reshape(x, {2, 3}), 4));
        CHECK(fd::check(tape, r, {x}, h).max_rel_err < tol);
    }
}

TEST_CASE("bilinear resize mean gradient vs finite differences") {
    tc::Tape tape;
    Tensor img = Tensor::leaf({3, 8, 8}, random_values(192, 200), tape);
    Tensor r = tc::mean_all(tc::bilinear_resize(img, 5, 5));
    auto res = fd::check(tape, r, {img}, 1e-4);
    INFO(res.worst);
    CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("gram self-loss has zero gradient") {
    tc::Tape tape;
    Tensor img = Tensor::leaf({2, 4, 4}, random_values(32, 300), tape);
    Tensor g1 = tc::gram(img);
    Tensor g2 = tc::gram(Tensor::constant({2, 4, 4}, img.data()));
    Tensor d = tc::sub(g1, g2);
    Tensor loss = tc::mean_all(tc::mul(d, d));
    tape.backward(loss);
    for (int64_t i = 0; i < img.numel(); ++i) CHECK(img.grad_at(i) == doctest::Approx(0.0));
}

TEST_CASE("leaf used k times gets k-fold gradient") {
    Rng rng(77);
    for (int k = 2; k <= 4; ++k) {
        tc::Tape tape;
        Tensor x = Tensor::leaf({1}, {rng.uniform(0.1, 0.9)}, tape);
        Tensor c = Tensor::constant({1}, {0.37});
        Tensor single = tc::mul(x, c);
        Tensor acc = single;
        for (int i = 1; i < k; ++i) acc = tc::add(acc, tc::mul(x, c));
        tape.backward(acc);
        CHECK(x.grad_at(0) == doctest::Approx(k * 0.37).epsilon(1e-5));
    }
}
