#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "motion_prior/tensor.hpp"

using mp::NoGrad;
using mp::Padding;
using mp::RandomStream;
using Td = mp::Tensor<double>;

namespace {

Td randn(std::vector<int> shape, RandomStream& rng) { return Td::randn(std::move(shape), rng); }

}  // namespace

TEST_CASE("tensor creation and bookkeeping") {
    auto z = Td::zeros({2, 3});
    CHECK(z.numel() == 6);
    CHECK(z.shape() == std::vector<int>{2, 3});
    for (int i = 0; i < 6; ++i) CHECK(z.data()[i] == 0.0);

    auto f = Td::full({2}, 1.5);
    CHECK(f.data()[1] == 1.5);

    auto d = Td::from_data({2, 2}, {1, 2, 3, 4});
    CHECK(d.data()[3] == 4.0);
    CHECK_THROWS_AS(Td::from_data({2, 2}, {1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(d.item(), std::logic_error);

    RandomStream rng(7);
    auto r1 = randn({4, 4}, rng);
    RandomStream rng2(7);
    auto r2 = randn({4, 4}, rng2);
    for (int i = 0; i < 16; ++i) CHECK(r1.data()[i] == r2.data()[i]);
}

TEST_CASE("conv1d hand oracles") {
    // identity kernel, k=1: output equals input
    RandomStream rng(3);
    auto x = randn({5, 3}, rng);
    auto w = Td::zeros({1, 3, 3});
    for (int c = 0; c < 3; ++c) w.mutable_data()[c * 3 + c] = 1.0;
    auto b = Td::zeros({3});
    auto y = mp::conv1d(x, w, b, 1, Padding::kSame);
    REQUIRE(y.shape() == x.shape());
    for (int i = 0; i < 15; ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));

    // sliding dot product, valid padding
    auto x2 = Td::from_data({4, 1}, {1, 2, 3, 4});
    auto w2 = Td::from_data({2, 1, 1}, {1, 1});
    auto b2 = Td::zeros({1});
    auto y2 = mp::conv1d(x2, w2, b2, 1, Padding::kValid);
    REQUIRE(y2.shape() == std::vector<int>{3, 1});
    CHECK(y2.data()[0] == 3.0);
    CHECK(y2.data()[1] == 5.0);
    CHECK(y2.data()[2] == 7.0);

    // same padding, stride 1, k=3 box kernel
    auto w3 = Td::from_data({3, 1, 1}, {1, 1, 1});
    auto y3 = mp::conv1d(x2, w3, b2, 1, Padding::kSame);
    REQUIRE(y3.shape() == std::vector<int>{4, 1});
    CHECK(y3.data()[0] == 3.0);
    CHECK(y3.data()[1] == 6.0);
    CHECK(y3.data()[2] == 9.0);
    CHECK(y3.data()[3] == 7.0);

    // stride 2 under same padding: T'=ceil(T/2)
    auto y4 = mp::conv1d(x2, w3, b2, 2, Padding::kSame);
    REQUIRE(y4.shape() == std::vector<int>{2, 1});
    CHECK(y4.data()[0] == 6.0);
    CHECK(y4.data()[1] == 7.0);

    // channel mismatch is rejected
    auto wbad = Td::zeros({1, 2, 3});
    CHECK_THROWS_AS(mp::conv1d(x, wbad, Td::zeros({3}), 1, Padding::kSame),
                    std::invalid_argument);
}

TEST_CASE("conv1d agrees with the serial reference kernel") {
    RandomStream rng(11);
    auto x = randn({9, 4}, rng);
    auto w = randn({3, 4, 5}, rng);
    auto b = randn({5}, rng);
    for (int stride : {1, 2, 3}) {
        for (auto pad : {Padding::kSame, Padding::kValid}) {
            auto y = mp::conv1d(x, w, b, stride, pad);
            int Tout = y.shape()[0];
            std::vector<double> ref(static_cast<size_t>(Tout) * 5);
            int pl = mp::kernels::conv1d_pad_left(9, 3, stride, pad);
            mp::kernels::ref::conv1d_forward(x.data(), 9, 4, w.data(), b.data(), 3, 5, stride, pl,
                                             ref.data(), Tout);
            for (size_t i = 0; i < ref.size(); ++i)
                CHECK(y.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("upsample oracles") {
    auto x = Td::from_data({2, 1}, {1, 2});
    auto y = mp::upsample_nearest(x, 2);
    REQUIRE(y.shape() == std::vector<int>{4, 1});
    CHECK(y.data()[0] == 1.0);
    CHECK(y.data()[1] == 1.0);
    CHECK(y.data()[2] == 2.0);
    CHECK(y.data()[3] == 2.0);

    auto y1 = mp::upsample_nearest(x, 1);
    CHECK(y1.values() == x.values());

    RandomStream rng(1);
    auto big = randn({4, 3}, rng);
    CHECK(mp::upsample_nearest(big, 2).shape() == std::vector<int>{8, 3});
    CHECK_THROWS_AS(mp::upsample_nearest(big, 0), std::invalid_argument);
}

TEST_CASE("backward basics") {
    auto x = Td::from_data({3}, {1, 2, 3}).set_requires_grad(true);
    auto loss = mp::sum(x);
    loss.backward();
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == 1.0);

    auto x2 = Td::from_data({2}, {1, 2}).set_requires_grad(true);
    auto loss2 = mp::sum(mp::square(x2));
    loss2.backward();
    CHECK(x2.grad()[0] == 2.0);
    CHECK(x2.grad()[1] == 4.0);

    // repeated backward accumulates
    loss2.backward();
    CHECK(x2.grad()[0] == 4.0);
    CHECK(x2.grad()[1] == 8.0);

    // non-scalar loss and detached graphs are rejected
    CHECK_THROWS_AS(mp::square(x2).backward(), std::logic_error);
    auto constant = Td::from_data({1}, {5});
    CHECK_THROWS_AS(mp::scale(constant, 2.0).backward(), std::logic_error);
}

TEST_CASE("NoGrad suppresses graph recording") {
    auto x = Td::from_data({2}, {1, 2}).set_requires_grad(true);
    {
        NoGrad guard;
        auto y = mp::sum(mp::square(x));
        CHECK_FALSE(y.requires_grad());
    }
    auto y = mp::sum(mp::square(x));
    CHECK(y.requires_grad());
}

TEST_CASE("backward is bit-deterministic per seed") {
    std::vector<double> first;
    for (int rep = 0; rep < 2; ++rep) {
        RandomStream rng(99);
        auto x = randn({6, 3}, rng).set_requires_grad(true);
        auto w = randn({3, 3, 4}, rng).set_requires_grad(true);
        auto b = randn({4}, rng).set_requires_grad(true);
        auto loss = mp::sum(mp::square(mp::conv1d(x, w, b, 2, Padding::kSame)));
        loss.backward();
        std::vector<double> flat(x.grad());
        flat.insert(flat.end(), w.grad().begin(), w.grad().end());
        flat.insert(flat.end(), b.grad().begin(), b.grad().end());
        if (rep == 0)
            first = flat;
        else
            CHECK(first == flat);
    }
}

TEST_CASE("gradient linearity") {
    RandomStream rng(5);
    auto make = [&](double a, double b, std::vector<double>& out) {
        RandomStream local(17);
        auto x = randn({3, 2}, local).set_requires_grad(true);
        auto f = mp::sum(mp::square(x));
        auto g = mp::sum(mp::exp(mp::scale(x, 0.3)));
        auto h = mp::add(mp::scale(f, a), mp::scale(g, b));
        h.backward();
        out = x.grad();
    };
    std::vector<double> gf, gg, gmix;
    make(1, 0, gf);
    make(0, 1, gg);
    make(2.5, -1.25, gmix);
    for (size_t i = 0; i < gmix.size(); ++i)
        CHECK(gmix[i] == doctest::Approx(2.5 * gf[i] - 1.25 * gg[i]).epsilon(1e-12));
    (void)rng;
}

TEST_CASE("grad_check quadratic exactness") {
    auto f = [](std::vector<Td>& ps) { return mp::sum(mp::square(ps[0])); };
    auto x = Td::from_data({1}, {3.0});
    CHECK(mp::grad_check<double>(f, {x}, 1e-6) < 1e-8);
}

TEST_CASE("grad_check across ops, 20 seeds") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        RandomStream rng(seed);
        auto a = randn({3, 2}, rng);
        auto b = randn({3, 2}, rng);

        auto elementwise = [](std::vector<Td>& ps) {
            auto t1 = mp::mul(mp::add(ps[0], ps[1]), mp::sub(ps[0], mp::scale(ps[1], 0.3)));
            auto t2 = mp::leaky_relu(t1, 0.2);
            auto t3 = mp::exp(mp::scale(mp::square(ps[0]), 0.1));
            return mp::add(mp::sum(t2), mp::mean(mp::add_scalar(t3, 0.5)));
        };
        CHECK(mp::grad_check<double>(elementwise, {a, b}, 1e-6) < 1e-5);

        auto x = randn({6, 2}, rng);
        auto w = randn({3, 2, 3}, rng);
        auto bias = randn({3}, rng);
        int stride = 1 + static_cast<int>(seed % 2);
        auto pad = seed % 3 == 0 ? Padding::kValid : Padding::kSame;
        auto conv = [stride, pad](std::vector<Td>& ps) {
            return mp::sum(mp::square(mp::conv1d(ps[0], ps[1], ps[2], stride, pad)));
        };
        CHECK(mp::grad_check<double>(conv, {x, w, bias}, 1e-6) < 1e-5);

        auto lx = randn({4, 3}, rng);
        auto lw = randn({3, 2}, rng);
        auto lb = randn({2}, rng);
        auto lin = [](std::vector<Td>& ps) {
            return mp::sum(mp::square(mp::linear(ps[0], ps[1], ps[2])));
        };
        CHECK(mp::grad_check<double>(lin, {lx, lw, lb}, 1e-6) < 1e-5);

        auto shapes = [](std::vector<Td>& ps) {
            auto cat = mp::concat_last(ps[0], ps[1]);
            auto up = mp::upsample_nearest(cat, 2);
            auto ps1 = mp::prefix_sum(up);
            auto sl = mp::slice_last(ps1, 1, 3);
            return mp::sum(mp::square(mp::reshape(sl, {static_cast<int>(sl.numel())})));
        };
        CHECK(mp::grad_check<double>(shapes, {a, b}, 1e-6) < 1e-5);
    }
}

TEST_CASE("linear and reference kernel agree") {
    RandomStream rng(21);
    auto x = randn({5, 4}, rng);
    auto w = randn({4, 3}, rng);
    auto b = randn({3}, rng);
    auto y = mp::linear(x, w, b);
    std::vector<double> ref(15);
    mp::kernels::ref::linear_forward(x.data(), 5, 4, w.data(), b.data(), 3, ref.data());
    for (int i = 0; i < 15; ++i) CHECK(y.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));

    auto xv = randn({4}, rng);
    auto yv = mp::linear(xv, w, b);
    CHECK(yv.shape() == std::vector<int>{3});
}

TEST_CASE("prefix_sum integrates and differentiates") {
    auto v = Td::from_data({2, 3}, {1, 0, 0, 1, 0, 0});
    auto g = mp::prefix_sum(v);
    CHECK(g.data()[0] == 1.0);
    CHECK(g.data()[3] == 2.0);

    // first difference recovers the input
    auto v2 = Td::from_data({4, 1}, {0.5, -1, 2, 0.25});
    auto g2 = mp::prefix_sum(v2);
    for (int t = 3; t >= 1; --t)
        CHECK(g2.data()[t] - g2.data()[t - 1] == doctest::Approx(v2.data()[t]));
    CHECK(g2.data()[0] == v2.data()[0]);
}

TEST_CASE("slice and concat round trip") {
    RandomStream rng(31);
    auto a = randn({3, 2}, rng);
    auto b = randn({3, 3}, rng);
    auto cat = mp::concat_last(a, b);
    REQUIRE(cat.shape() == std::vector<int>{3, 5});
    auto back_a = mp::slice_last(cat, 0, 2);
    auto back_b = mp::slice_last(cat, 2, 5);
    CHECK(back_a.values() == a.values());
    CHECK(back_b.values() == b.values());
    CHECK_THROWS_AS(mp::slice_last(cat, 3, 3), std::invalid_argument);
    CHECK_THROWS_AS(mp::concat_last(a, Td::zeros({4, 2})), std::invalid_argument);
}
