#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "motion_prior/skeleton.hpp"

using namespace mp;
using Td = Tensor<double>;

namespace {

// n joints in a straight chain: n-1 bones
Skeleton make_chain(int joints) {
    Skeleton s;
    for (int j = 0; j < joints; ++j)
        s.joints.push_back({"j" + std::to_string(j), j - 1, {0, 1, 0}});
    return s;
}

Skeleton make_star(int leaves) {
    Skeleton s;
    s.joints.push_back({"root", -1, {0, 0, 0}});
    for (int j = 0; j < leaves; ++j)
        s.joints.push_back({"leaf" + std::to_string(j), 0, {1, 0, 0}});
    return s;
}

Skeleton random_tree(int joints, RandomStream& rng) {
    Skeleton s;
    s.joints.push_back({"j0", -1, {0, 0, 0}});
    for (int j = 1; j < joints; ++j)
        s.joints.push_back(
            {"j" + std::to_string(j), static_cast<int>(rng.index(j)), {0, 0.5, 0}});
    return s;
}

}  // namespace

TEST_CASE("skeleton validation") {
    auto toy = Skeleton::toy7();
    toy.validate();
    CHECK(toy.joint_count() == 7);
    CHECK(toy.root() == 0);
    CHECK(toy.find("head") == 2);
    CHECK(toy.find("no_such") == -1);

    Skeleton two_roots;
    two_roots.joints = {{"a", -1, {0, 0, 0}}, {"b", -1, {0, 0, 0}}};
    CHECK_THROWS_AS(two_roots.validate(), std::invalid_argument);

    Skeleton cycle;
    cycle.joints = {{"a", -1, {0, 0, 0}}, {"b", 2, {0, 0, 0}}, {"c", 1, {0, 0, 0}}};
    CHECK_THROWS_AS(cycle.validate(), std::invalid_argument);
}

TEST_CASE("neighbors_within on chains") {
    auto chain3 = make_chain(4);  // bones b0, b1, b2
    auto d0 = neighbors_within(chain3, 0);
    for (int i = 0; i < 3; ++i) CHECK(d0.sets[i] == std::vector<int>{i});

    auto d1 = neighbors_within(chain3, 1);
    CHECK(d1.sets[0] == std::vector<int>{0, 1});
    CHECK(d1.sets[1] == std::vector<int>{0, 1, 2});
    CHECK(d1.sets[2] == std::vector<int>{1, 2});

    auto chain5 = make_chain(6);  // bones b0..b4
    auto d2 = neighbors_within(chain5, 2);
    CHECK(d2.sets[0] == std::vector<int>{0, 1, 2});

    CHECK_THROWS_AS(neighbors_within(chain3, -1), std::invalid_argument);
}

TEST_CASE("neighbor tables are symmetric with self-membership on random trees") {
    RandomStream rng(42);
    for (int trial = 0; trial < 12; ++trial) {
        int joints = 5 + static_cast<int>(rng.index(47));  // up to 51 joints = 50 bones
        auto tree = random_tree(joints, rng);
        auto g = BoneGraph::bones_of(tree);
        for (int d : {0, 1, 2, 3}) {
            auto nt = neighbors_within(g, d);
            for (int i = 0; i < g.count; ++i) {
                CHECK(std::find(nt.sets[i].begin(), nt.sets[i].end(), i) != nt.sets[i].end());
                for (int j : nt.sets[i]) {
                    bool sym = std::find(nt.sets[j].begin(), nt.sets[j].end(), i) !=
                               nt.sets[j].end();
                    CHECK(sym);
                }
            }
        }
    }
}

TEST_CASE("pooling plans merge degree-2 pairs root-outward") {
    auto plan4 = build_pooling_plan(make_chain(5));  // 4 bones
    REQUIRE(plan4.groups.size() == 2);
    CHECK(plan4.groups[0] == std::vector<int>{0, 1});
    CHECK(plan4.groups[1] == std::vector<int>{2, 3});

    auto plan5 = build_pooling_plan(make_chain(6));  // 5 bones
    REQUIRE(plan5.groups.size() == 3);
    CHECK(plan5.groups[0] == std::vector<int>{0, 1});
    CHECK(plan5.groups[1] == std::vector<int>{2, 3});
    CHECK(plan5.groups[2] == std::vector<int>{4});

    auto star = build_pooling_plan(make_star(3));
    REQUIRE(star.groups.size() == 3);
    for (const auto& g : star.groups) CHECK(g.size() == 1);
}

TEST_CASE("toy-7 channel hierarchy") {
    auto toy = Skeleton::toy7();
    auto g = BoneGraph::channels_of(toy);
    CHECK(g.count == 7);
    auto plan = build_pooling_plan(g);
    REQUIRE(plan.groups.size() == 4);
    CHECK(plan.groups[0] == std::vector<int>{0, 1});  // root channel + spine
    CHECK(plan.groups[1] == std::vector<int>{2});     // head
    CHECK(plan.groups[2] == std::vector<int>{3, 4});  // left arm
    CHECK(plan.groups[3] == std::vector<int>{5, 6});  // right arm

    auto plan2 = build_pooling_plan(plan.merged);
    CHECK(plan2.groups.size() == 4);  // no degree-2 joints remain
}

TEST_CASE("pooling plans cover disjointly at every level") {
    auto check_plan = [](const BoneGraph& g0) {
        BoneGraph g = g0;
        for (int level = 0; level < 6; ++level) {
            auto plan = build_pooling_plan(g);
            std::vector<int> hit(plan.source_count, 0);
            for (const auto& grp : plan.groups) {
                CHECK((grp.size() == 1 || grp.size() == 2));
                for (int u : grp) {
                    REQUIRE(u >= 0);
                    REQUIRE(u < plan.source_count);
                    hit[u]++;
                }
            }
            for (int h : hit) CHECK(h == 1);
            if (static_cast<int>(plan.groups.size()) == g.count) break;
            g = plan.merged;
        }
    };
    check_plan(BoneGraph::channels_of(Skeleton::smpl24()));
    check_plan(BoneGraph::bones_of(Skeleton::smpl24()));
    RandomStream rng(77);
    for (int trial = 0; trial < 8; ++trial)
        check_plan(BoneGraph::bones_of(random_tree(4 + static_cast<int>(rng.index(30)), rng)));
}

TEST_CASE("skeleton_conv identity and averaging oracles") {
    auto chain3 = make_chain(4);
    auto g = BoneGraph::bones_of(chain3);

    // d=0, k=1, unit weights: the identity map
    auto nt0 = conv_topology(neighbors_within(g, 0));
    RandomStream rng(3);
    auto x = Td::randn({5, 3, 1}, rng);
    auto w = Td::ones({3, 1, 1, 1});
    auto b = Td::zeros({3, 1});
    auto y = skeleton_conv(x, w, b, nt0, 1, Padding::kSame);
    REQUIRE(y.shape() == x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));

    // d=1, unit weights on a constant signal averages neighbors
    auto nt1 = conv_topology(neighbors_within(g, 1));
    auto xc = Td::zeros({2, 3, 1});
    for (int t = 0; t < 2; ++t)
        for (int bone = 0; bone < 3; ++bone) xc.mutable_data()[t * 3 + bone] = bone + 1.0;
    auto w1 = Td::ones({nt1.pairs(), 1, 1, 1});
    auto b1 = Td::zeros({nt1.pairs(), 1});
    auto y1 = skeleton_conv(xc, w1, b1, nt1, 1, Padding::kSame);
    CHECK(y1.data()[0] == doctest::Approx(1.5));
    CHECK(y1.data()[1] == doctest::Approx(2.0));
    CHECK(y1.data()[2] == doctest::Approx(2.5));

    // stride halves time
    auto x8 = Td::randn({8, 3, 2}, rng);
    auto w8 = Td::randn({nt1.pairs(), 3, 2, 4}, rng);
    auto b8 = Td::randn({nt1.pairs(), 4}, rng);
    auto y8 = skeleton_conv(x8, w8, b8, nt1, 2, Padding::kSame);
    CHECK(y8.shape() == std::vector<int>{4, 3, 4});

    // missing pair weights rejected
    auto wshort = Td::randn({nt1.pairs() - 1, 3, 2, 4}, rng);
    CHECK_THROWS_AS(skeleton_conv(x8, wshort, b8, nt1, 2, Padding::kSame),
                    std::invalid_argument);
}

TEST_CASE("skeleton_conv agrees with the serial reference") {
    auto toy = Skeleton::toy7();
    auto g = BoneGraph::channels_of(toy);
    auto topo = conv_topology(neighbors_within(g, 2));
    RandomStream rng(9);
    auto x = Td::randn({6, 7, 3}, rng);
    auto w = Td::randn({topo.pairs(), 3, 3, 2}, rng);
    auto b = Td::randn({topo.pairs(), 2}, rng);
    auto y = skeleton_conv(x, w, b, topo, 2, Padding::kSame);
    int Tout = y.shape()[0];
    std::vector<double> ref(static_cast<size_t>(Tout) * 7 * 2);
    int pl = kernels::conv1d_pad_left(6, 3, 2, Padding::kSame);
    kernels::ref::skel_conv_forward(x.data(), 6, 7, 3, w.data(), b.data(), 3, 2, 2, pl, topo,
                                    ref.data(), Tout);
    for (size_t i = 0; i < ref.size(); ++i)
        CHECK(y.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("skeleton ops pass grad_check") {
    auto toy = Skeleton::toy7();
    auto g = BoneGraph::channels_of(toy);
    auto topo = conv_topology(neighbors_within(g, 2));
    auto plan = build_pooling_plan(g);
    for (uint64_t seed = 0; seed < 8; ++seed) {
        RandomStream rng(seed);
        auto x = Td::randn({4, 7, 2}, rng);
        auto w = Td::randn({topo.pairs(), 3, 2, 2}, rng);
        auto b = Td::randn({topo.pairs(), 2}, rng);
        auto conv = [&topo](std::vector<Td>& ps) {
            return sum(square(skeleton_conv(ps[0], ps[1], ps[2], topo, 2, Padding::kSame)));
        };
        CHECK(grad_check<double>(conv, {x, w, b}, 1e-6) < 1e-5);

        auto pools = [&plan](std::vector<Td>& ps) {
            auto pooled = skeleton_pool(ps[0], plan);
            auto up = skeleton_unpool(pooled, plan);
            return sum(square(up));
        };
        CHECK(grad_check<double>(pools, {x}, 1e-6) < 1e-5);
    }
}

TEST_CASE("pool and unpool oracles") {
    auto toy = Skeleton::toy7();
    auto plan = build_pooling_plan(BoneGraph::channels_of(toy));

    // pair {0,1} averages: root channel 2, spine 4 -> 3
    auto x = Td::zeros({1, 7, 1});
    x.mutable_data()[0] = 2;
    x.mutable_data()[1] = 4;
    auto pooled = skeleton_pool(x, plan);
    CHECK(pooled.data()[0] == doctest::Approx(3.0));

    // pool(unpool(F)) = F for any F
    RandomStream rng(4);
    auto f = Td::randn({3, 4, 2}, rng);
    auto round = skeleton_pool(skeleton_unpool(f, plan), plan);
    for (int64_t i = 0; i < f.numel(); ++i)
        CHECK(round.data()[i] == doctest::Approx(f.data()[i]).epsilon(1e-12));

    // unpool(pool(F)) = F when F is constant within groups
    auto fc = skeleton_unpool(f, plan);
    auto round2 = skeleton_unpool(skeleton_pool(fc, plan), plan);
    for (int64_t i = 0; i < fc.numel(); ++i)
        CHECK(round2.data()[i] == doctest::Approx(fc.data()[i]).epsilon(1e-12));

    // all-singleton plan is the identity
    auto star = make_star(3);
    auto splan = build_pooling_plan(BoneGraph::bones_of(star));
    auto xs = Td::randn({2, 3, 2}, rng);
    auto ys = skeleton_pool(xs, splan);
    for (int64_t i = 0; i < xs.numel(); ++i) CHECK(ys.data()[i] == xs.data()[i]);

    // shape mismatch with the plan
    CHECK_THROWS_AS(skeleton_pool(Td::zeros({2, 5, 1}), plan), std::invalid_argument);
    CHECK_THROWS_AS(skeleton_unpool(Td::zeros({2, 5, 1}), plan), std::invalid_argument);
}
