#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "motion_prior/trajectory.hpp"

using namespace mp;

namespace {

std::vector<MotionWindow> toy_windows(uint64_t seed, int n, int length) {
    SynthConfig sc;
    sc.seed = seed;
    sc.length = length;
    auto clips = synth_dataset(sc, n);
    std::vector<MotionWindow> out;
    for (const auto& c : clips) out.push_back(clip_to_window(c));
    return out;
}

double velocity_mse(const TrajectoryNet& model, const std::vector<MotionWindow>& data) {
    NoGrad guard;
    double sum = 0;
    int frames = 0;
    for (const auto& w : data) {
        auto vp = model.forward(local_positions(w, model.skeleton()));
        auto [v, g] = root_motion_targets(w);
        for (int64_t i = 0; i < vp.numel(); i += 3) {
            double dx = vp.data()[i] - v.data()[i];
            double dy = vp.data()[i + 1] - v.data()[i + 1];
            double dz = vp.data()[i + 2] - v.data()[i + 2];
            sum += dx * dx + dy * dy + dz * dz;
        }
        frames += w.T;
    }
    return sum / frames;
}

}  // namespace

TEST_CASE("forward maps [T x J x 3] to [T x 3] and keeps every frame") {
    RandomStream rng(7);
    TrajectoryNet net(Skeleton::toy7(), TrajectoryDescriptor::toy(), rng);
    auto w = toy_windows(3, 1, 11)[0];
    auto p = local_positions(w, net.skeleton());
    CHECK(p.shape() == std::vector<int>{11, 7, 3});
    auto v = net.forward(p);
    CHECK(v.shape() == std::vector<int>{11, 3});

    auto again = net.forward(p);
    for (int64_t i = 0; i < v.numel(); ++i) CHECK(v.data()[i] == again.data()[i]);

    auto bad = Tensor<double>::zeros({11, 6, 3});
    CHECK_THROWS_AS(net.forward(bad), std::invalid_argument);
    CHECK_THROWS_AS(net.forward(Tensor<double>::zeros({11, 7})), std::invalid_argument);
}

TEST_CASE("integrate_trajectory is the inclusive prefix sum") {
    auto v = Tensor<double>::from_data({2, 3}, {1, 0, 0, 1, 0, 0});
    auto g = integrate_trajectory(v);
    CHECK(g.values() == std::vector<double>{1, 0, 0, 2, 0, 0});

    auto zeros = integrate_trajectory(Tensor<double>::zeros({5, 3}));
    for (int64_t i = 0; i < zeros.numel(); ++i) CHECK(zeros.data()[i] == 0.0);

    CHECK_THROWS_AS(integrate_trajectory(Tensor<double>::zeros({5, 2})), std::invalid_argument);
}

TEST_CASE("integration identity G_t = G_{t-1} + V_t is bit-exact") {
    RandomStream rng(11);
    std::vector<double> vals(60);
    for (auto& x : vals) x = rng.uniform(-0.3, 0.3);
    auto v = Tensor<double>::from_data({20, 3}, vals);
    auto g = integrate_trajectory(v);
    for (int e = 0; e < 3; ++e) CHECK(g.data()[e] == v.data()[e]);
    for (int t = 1; t < 20; ++t)
        for (int e = 0; e < 3; ++e)
            CHECK(g.data()[3 * t + e] == g.data()[3 * (t - 1) + e] + v.data()[3 * t + e]);
}

TEST_CASE("first differences recover dyadic velocities exactly") {
    // every partial sum of multiples of 1/256 below 1 is exact in f64
    RandomStream rng(4);
    std::vector<double> vals(48);
    for (auto& x : vals) x = ((int)rng.index(17) - 8) / 256.0;
    auto v = Tensor<double>::from_data({16, 3}, vals);
    auto g = integrate_trajectory(v);
    for (int t = 1; t < 16; ++t)
        for (int e = 0; e < 3; ++e)
            CHECK(g.data()[3 * t + e] - g.data()[3 * (t - 1) + e] == v.data()[3 * t + e]);
}

TEST_CASE("trajectory_loss: zero at the target, hand case, nonnegative") {
    auto v = Tensor<double>::from_data({4, 3}, std::vector<double>(12, 0.25));
    auto g = integrate_trajectory(v);
    CHECK(trajectory_loss(v, v, g, g).item() == 0.0);

    // one-frame velocity error of (1,0,0) at t=2 over T=6: the integrated
    // track is off by one unit on frames 2..5, so 1 + 4
    int T = 6, f = 2;
    auto base = Tensor<double>::zeros({T, 3});
    std::vector<double> bump((size_t)T * 3, 0.0);
    bump[3 * f] = 1.0;
    auto vp = Tensor<double>::from_data({T, 3}, bump);
    auto loss = trajectory_loss(vp, base, integrate_trajectory(vp), integrate_trajectory(base));
    CHECK(loss.item() == 5.0);

    RandomStream rng(9);
    std::vector<double> a(18), b(18);
    for (auto& x : a) x = rng.normal();
    for (auto& x : b) x = rng.normal();
    auto ta = Tensor<double>::from_data({6, 3}, a);
    auto tb = Tensor<double>::from_data({6, 3}, b);
    CHECK(trajectory_loss(ta, tb, integrate_trajectory(ta), integrate_trajectory(tb)).item() >
          0.0);
    CHECK_THROWS_AS(trajectory_loss(ta, Tensor<double>::zeros({5, 3}), ta, ta),
                    std::invalid_argument);
}

TEST_CASE("root_motion_targets: zero first row, exact differences, integrates back") {
    auto w = toy_windows(6, 1, 12)[0];
    auto [v, g] = root_motion_targets(w);
    CHECK(v.shape() == std::vector<int>{12, 3});
    for (int e = 0; e < 3; ++e) {
        CHECK(v.data()[e] == 0.0);
        CHECK(g.data()[e] == 0.0);
    }
    for (int t = 1; t < 12; ++t)
        for (int e = 0; e < 3; ++e) {
            CHECK(v.data()[3 * t + e] ==
                  w.root_pos[3 * t + e] - w.root_pos[3 * (t - 1) + e]);
            CHECK(g.data()[3 * t + e] == w.root_pos[3 * t + e] - w.root_pos[e]);
        }
    auto gi = integrate_trajectory(v);
    for (int64_t i = 0; i < gi.numel(); ++i)
        CHECK(gi.data()[i] == doctest::Approx(g.data()[i]).epsilon(1e-12));
}

TEST_CASE("model gradients agree with central differences") {
    RandomStream rng(2);
    TrajectoryDescriptor d;
    d.channels = {2, 2, 2, 2};
    d.k = 2;
    // slope 1 removes the activation kinks, which central differences step
    // across at this eps; the kinked activation has its own op-level check
    d.leaky_slope = 1.0;
    TrajectoryNet net(Skeleton::toy7(), d, rng);

    auto w = toy_windows(8, 1, 6)[0];
    auto p = local_positions(w, net.skeleton());
    auto [v, g] = root_motion_targets(w);

    auto f = [&](std::vector<Tensor<double>>&) {
        auto vp = net.forward(p);
        return trajectory_loss(vp, v, integrate_trajectory(vp), g);
    };
    double worst = grad_check<double>(f, net.parameters(), 1e-5);
    CHECK(worst < 1e-5);
}

TEST_CASE("training reaches a tenth of the untrained velocity MSE") {
    auto data = toy_windows(1, 4, 16);
    RandomStream rng(1);
    TrajectoryNet net(Skeleton::toy7(), TrajectoryDescriptor{}, rng);

    double before = velocity_mse(net, data);
    TrajectoryTrainConfig cfg;
    cfg.iters = 1600;
    cfg.lr = 3e-3;
    cfg.seed = 2;
    auto log = train_trajectory(net, data, cfg);
    double after = velocity_mse(net, data);

    CHECK((int)log.size() == cfg.iters);
    CHECK(log.back().total < log.front().total);
    CHECK(after <= 0.1 * before);
}

TEST_CASE("training is deterministic and rejects an empty dataset") {
    auto data = toy_windows(5, 2, 10);
    TrajectoryTrainConfig cfg;
    cfg.iters = 12;

    RandomStream r1(3), r2(3);
    TrajectoryNet a(Skeleton::toy7(), TrajectoryDescriptor::toy(), r1);
    TrajectoryNet b(Skeleton::toy7(), TrajectoryDescriptor::toy(), r2);
    auto la = train_trajectory(a, data, cfg);
    auto lb = train_trajectory(b, data, cfg);
    CHECK(trajectory_log_csv(la) == trajectory_log_csv(lb));
    CHECK(trajectory_log_csv(la).rfind("iter,total,velocity,position\n", 0) == 0);

    TrajectoryNet c(Skeleton::toy7(), TrajectoryDescriptor::toy(), r1);
    CHECK_THROWS_AS(train_trajectory(c, {}, cfg), std::invalid_argument);
}

TEST_CASE("trajectory_csv lists one row per frame") {
    RandomStream rng(13);
    TrajectoryNet net(Skeleton::toy7(), TrajectoryDescriptor::toy(), rng);
    auto w = toy_windows(2, 1, 9)[0];
    auto t = predict_trajectory(net, local_positions(w, net.skeleton()));
    auto csv = trajectory_csv(t);

    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,vx,vy,vz,gx,gy,gz");
    int rows = 0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        CHECK(std::stoi(cell) == rows);
        int cells = 1;
        while (std::getline(ls, cell, ',')) ++cells;
        CHECK(cells == 7);
        ++rows;
    }
    CHECK(rows == 9);
}
