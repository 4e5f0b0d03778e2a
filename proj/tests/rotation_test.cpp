#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "motion_prior/rotation.hpp"

using namespace mp;

namespace {

void check_mat(const Mat3& got, const Mat3& want, double tol = 1e-12) {
    for (int i = 0; i < 9; ++i) CHECK(got.m[i] == doctest::Approx(want.m[i]).epsilon(tol).scale(1));
}

}  // namespace

TEST_CASE("rot6d_to_matrix hand cases") {
    check_mat(rot6d_to_matrix({1, 0, 0, 0, 1, 0}), Mat3::identity());
    check_mat(rot6d_to_matrix({2, 0, 0, 0, 3, 0}), Mat3::identity());
    // Gram-Schmidt strips the first-column component of (1,1,0)
    check_mat(rot6d_to_matrix({1, 0, 0, 1, 1, 0}), Mat3::identity());

    CHECK_THROWS_AS(rot6d_to_matrix({0, 0, 0, 0, 1, 0}), std::domain_error);
    CHECK_THROWS_AS(rot6d_to_matrix({1, 0, 0, 2, 0, 0}), std::domain_error);
}

TEST_CASE("matrix_to_rot6d reads columns") {
    Rot6 id = matrix_to_rot6d(Mat3::identity());
    Rot6 want{1, 0, 0, 0, 1, 0};
    for (int i = 0; i < 6; ++i) CHECK(id[i] == want[i]);

    Mat3 rz90 = axis_rotation('Z', 90);
    Rot6 r = matrix_to_rot6d(rz90);
    Rot6 expect{0, 1, 0, -1, 0, 0};
    for (int i = 0; i < 6; ++i) CHECK(r[i] == doctest::Approx(expect[i]).scale(1));

    Mat3 junk;
    junk.m = {2, 0, 0, 0, 1, 0, 0, 0, 1};
    CHECK_THROWS_AS(matrix_to_rot6d(junk), std::invalid_argument);
}

TEST_CASE("6D round trip on random rotations") {
    RandomStream rng(12);
    for (int i = 0; i < 1000; ++i) {
        Mat3 R = random_rotation(rng);
        CHECK(rotation_residual(R) < 1e-9);
        Mat3 back = rot6d_to_matrix(matrix_to_rot6d(R));
        for (int e = 0; e < 9; ++e) CHECK(std::abs(back.m[e] - R.m[e]) < 1e-6);
    }
}

TEST_CASE("rot6d projection always lands on the rotation group") {
    RandomStream rng(13);
    for (int i = 0; i < 1000; ++i) {
        Rot6 r;
        for (auto& v : r) v = rng.normal();
        Mat3 R = rot6d_to_matrix(r);
        CHECK(rotation_residual(R) < 1e-6);
    }
}

TEST_CASE("matrix_to_quat hand cases") {
    Quat id = matrix_to_quat(Mat3::identity());
    CHECK(id.w == doctest::Approx(1.0));
    CHECK(id.x == doctest::Approx(0.0).scale(1));

    Quat rz = matrix_to_quat(axis_rotation('Z', 90));
    double h = std::sqrt(0.5);
    CHECK(rz.w == doctest::Approx(h));
    CHECK(rz.x == doctest::Approx(0.0).scale(1));
    CHECK(rz.y == doctest::Approx(0.0).scale(1));
    CHECK(rz.z == doctest::Approx(h));

    Quat rx = matrix_to_quat(axis_rotation('X', 180));
    CHECK(rx.w == doctest::Approx(0.0).scale(1));
    CHECK(rx.x == doctest::Approx(1.0));

    // hemisphere rule: w never negative
    RandomStream rng(5);
    for (int i = 0; i < 200; ++i) CHECK(matrix_to_quat(random_rotation(rng)).w >= 0.0);
}

TEST_CASE("quaternion matrix round trip") {
    RandomStream rng(8);
    for (int i = 0; i < 200; ++i) {
        Mat3 R = random_rotation(rng);
        Mat3 back = quat_to_matrix(matrix_to_quat(R));
        for (int e = 0; e < 9; ++e) CHECK(std::abs(back.m[e] - R.m[e]) < 1e-9);
    }
}

TEST_CASE("slerp") {
    Quat q = matrix_to_quat(axis_rotation('Y', 40));
    Quat mid = slerp(q, q, 0.5);
    CHECK(mid.w == doctest::Approx(q.w));
    CHECK(mid.y == doctest::Approx(q.y));

    Quat id{1, 0, 0, 0};
    Quat rz90 = matrix_to_quat(axis_rotation('Z', 90));
    Quat half = slerp(id, rz90, 0.5);
    double c = std::cos(22.5 * 3.14159265358979323846 / 180.0);
    double s = std::sin(22.5 * 3.14159265358979323846 / 180.0);
    CHECK(half.w == doctest::Approx(c).epsilon(1e-9));
    CHECK(half.z == doctest::Approx(s).epsilon(1e-9));

    Quat end = slerp(id, rz90, 1.0);
    CHECK(std::abs(std::abs(end.dot(rz90)) - 1.0) < 1e-9);

    RandomStream rng(20);
    Quat a = matrix_to_quat(random_rotation(rng));
    Quat b = matrix_to_quat(random_rotation(rng));
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0})
        CHECK(std::abs(slerp(a, b, t).norm() - 1.0) < 1e-6);

    CHECK_THROWS_AS(slerp({2, 0, 0, 0}, id, 0.5), std::invalid_argument);
}

TEST_CASE("euler extraction round trips all six orders") {
    const char* orders[] = {"XYZ", "XZY", "YXZ", "YZX", "ZXY", "ZYX"};
    RandomStream rng(30);
    for (const char* order : orders) {
        for (int i = 0; i < 100; ++i) {
            Mat3 R = random_rotation(rng);
            auto e = matrix_to_euler(R, order);
            Mat3 back = axis_rotation(order[0], e[0]) * axis_rotation(order[1], e[1]) *
                        axis_rotation(order[2], e[2]);
            for (int k = 0; k < 9; ++k) CHECK(std::abs(back.m[k] - R.m[k]) < 1e-9);
        }
        // gimbal-lock pose for this order
        Mat3 lock = axis_rotation(order[0], 33) * axis_rotation(order[1], 90) *
                    axis_rotation(order[2], 0);
        auto e = matrix_to_euler(lock, order);
        Mat3 back = axis_rotation(order[0], e[0]) * axis_rotation(order[1], e[1]) *
                    axis_rotation(order[2], e[2]);
        for (int k = 0; k < 9; ++k) CHECK(std::abs(back.m[k] - lock.m[k]) < 1e-8);
    }
}

TEST_CASE("rot6d op gradient") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        RandomStream rng(seed);
        auto r6 = Tensor<double>::randn({4, 6}, rng);
        auto f = [](std::vector<Tensor<double>>& ps) {
            return sum(square(rot6d_to_matrix_op(ps[0])));
        };
        CHECK(grad_check<double>(f, {r6}, 1e-6) < 1e-5);
    }
}
