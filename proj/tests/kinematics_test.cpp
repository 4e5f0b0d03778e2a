#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "motion_prior/kinematics.hpp"

using namespace mp;
using Td = Tensor<double>;

namespace {

Skeleton make_chain3() {
    Skeleton s;
    s.joints = {{"j0", -1, {0, 0, 0}}, {"j1", 0, {0, 1, 0}}, {"j2", 1, {0, 1, 0}}};
    return s;
}

Pose identity_pose(const Skeleton& s) {
    Pose p;
    p.rotations.assign(s.joint_count(), Mat3::identity());
    return p;
}

Pose random_pose(const Skeleton& s, RandomStream& rng) {
    Pose p;
    for (int j = 0; j < s.joint_count(); ++j) p.rotations.push_back(random_rotation(rng));
    p.root_translation = {rng.normal(), rng.normal(), rng.normal()};
    return p;
}

Td pose_rotmats(const Pose& p) {
    std::vector<double> flat;
    for (const auto& R : p.rotations) flat.insert(flat.end(), R.m.begin(), R.m.end());
    return Td::from_data({1, static_cast<int>(p.rotations.size()), 9}, std::move(flat));
}

}  // namespace

TEST_CASE("straight chain hand cases") {
    auto s = make_chain3();
    auto pose = identity_pose(s);
    auto pos = forward_kinematics(pose, s);
    CHECK(pos[0].norm() == 0.0);
    CHECK((pos[1] - Vec3{0, 1, 0}).norm() < 1e-12);
    CHECK((pos[2] - Vec3{0, 2, 0}).norm() < 1e-12);

    // root rotated 90 degrees about z sends the chain along -x
    pose.rotations[0] = axis_rotation('Z', 90);
    pos = forward_kinematics(pose, s);
    CHECK((pos[1] - Vec3{-1, 0, 0}).norm() < 1e-12);
    CHECK((pos[2] - Vec3{-2, 0, 0}).norm() < 1e-12);

    // rigid translation shifts every joint
    pose.root_translation = {3, -2, 0.5};
    auto shifted = forward_kinematics(pose, s);
    for (int j = 0; j < 3; ++j)
        CHECK((shifted[j] - (pos[j] + Vec3{3, -2, 0.5})).norm() < 1e-12);
}

TEST_CASE("global rotation equivariance") {
    auto s = Skeleton::toy7();
    RandomStream rng(2);
    auto pose = random_pose(s, rng);
    auto base = forward_kinematics(pose, s);
    Mat3 R0 = random_rotation(rng);
    Pose rotated = pose;
    rotated.rotations[s.root()] = R0 * pose.rotations[s.root()];
    auto moved = forward_kinematics(rotated, s);
    Vec3 root = base[s.root()];
    for (int j = 0; j < s.joint_count(); ++j) {
        Vec3 want = root + R0 * (base[j] - root);
        CHECK((moved[j] - want).norm() < 1e-9);
    }
}

TEST_CASE("bone lengths are preserved under any pose") {
    auto s = Skeleton::smpl24();
    RandomStream rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        auto pose = random_pose(s, rng);
        auto pos = forward_kinematics(pose, s);
        for (int j = 0; j < s.joint_count(); ++j) {
            int p = s.joints[j].parent;
            if (p < 0) continue;
            double want = s.joints[j].offset.norm();
            CHECK((pos[j] - pos[p]).norm() == doctest::Approx(want).epsilon(1e-9));
        }
    }
}

TEST_CASE("tensor op matches the scalar path and the serial reference") {
    auto s = Skeleton::toy7();
    RandomStream rng(14);
    int T = 5, J = s.joint_count();
    std::vector<double> rot, trans;
    std::vector<Pose> poses;
    for (int t = 0; t < T; ++t) {
        auto pose = random_pose(s, rng);
        poses.push_back(pose);
        for (const auto& R : pose.rotations) rot.insert(rot.end(), R.m.begin(), R.m.end());
        trans.push_back(pose.root_translation.x);
        trans.push_back(pose.root_translation.y);
        trans.push_back(pose.root_translation.z);
    }
    auto rt = Td::from_data({T, J, 9}, rot);
    auto tt = Td::from_data({T, 3}, trans);
    auto out = forward_kinematics_op(rt, tt, s);
    REQUIRE(out.shape() == std::vector<int>{T, J, 3});
    for (int t = 0; t < T; ++t) {
        auto pos = forward_kinematics(poses[t], s);
        for (int j = 0; j < J; ++j) {
            CHECK(out.data()[(t * J + j) * 3 + 0] == doctest::Approx(pos[j].x).epsilon(1e-12));
            CHECK(out.data()[(t * J + j) * 3 + 1] == doctest::Approx(pos[j].y).epsilon(1e-12));
            CHECK(out.data()[(t * J + j) * 3 + 2] == doctest::Approx(pos[j].z).epsilon(1e-12));
        }
    }

    auto parent = s.parents();
    auto order = s.topo_order();
    std::vector<double> offs(static_cast<size_t>(J) * 3);
    for (int j = 0; j < J; ++j) {
        offs[3 * j] = s.joints[j].offset.x;
        offs[3 * j + 1] = s.joints[j].offset.y;
        offs[3 * j + 2] = s.joints[j].offset.z;
    }
    std::vector<double> ref(static_cast<size_t>(T) * J * 3);
    kernels::ref::fk_forward(rot.data(), trans.data(), T, J, parent.data(), order.data(),
                             offs.data(), ref.data());
    for (size_t i = 0; i < ref.size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("fk gradients match finite differences") {
    auto s = Skeleton::toy7();
    for (uint64_t seed = 0; seed < 10; ++seed) {
        RandomStream rng(seed);
        int T = 2, J = s.joint_count();
        std::vector<double> rot;
        for (int i = 0; i < T * J; ++i) {
            Mat3 R = random_rotation(rng);
            rot.insert(rot.end(), R.m.begin(), R.m.end());
        }
        auto rt = Td::from_data({T, J, 9}, rot);
        auto tt = Td::randn({T, 3}, rng);
        auto target = Td::randn({T, J, 3}, rng);
        auto f = [&s, &target](std::vector<Td>& ps) {
            auto pos = forward_kinematics_op(ps[0], ps[1], s);
            return sum(square(sub(pos, target)));
        };
        CHECK(grad_check<double>(f, {rt, tt}, 1e-6) < 1e-5);
    }
}

TEST_CASE("fk through the 6D projection passes grad_check") {
    auto s = Skeleton::toy7();
    RandomStream rng(50);
    auto r6 = Td::randn({2, s.joint_count(), 6}, rng);
    auto f = [&s](std::vector<Td>& ps) {
        auto mats = rot6d_to_matrix_op(ps[0]);
        return sum(square(forward_kinematics_op(mats, s)));
    };
    CHECK(grad_check<double>(f, {r6}, 1e-6) < 1e-5);
}

TEST_CASE("joint count mismatches are rejected") {
    auto s = make_chain3();
    Pose bad;
    bad.rotations.assign(2, Mat3::identity());
    CHECK_THROWS_AS(forward_kinematics(bad, s), std::invalid_argument);
    CHECK_THROWS_AS(forward_kinematics_op(Td::zeros({2, 5, 9}), s), std::invalid_argument);
}
