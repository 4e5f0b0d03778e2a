#include "motion_prior/rotation.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mp {

namespace {

constexpr double kPi = 3.14159265358979323846;

double clamp1(double v) { return std::clamp(v, -1.0, 1.0); }

int axis_index(char axis) {
    switch (axis) {
        case 'X': return 0;
        case 'Y': return 1;
        case 'Z': return 2;
        default: throw std::invalid_argument(std::string("unknown rotation axis '") + axis + "'");
    }
}

// Angle of a pure single-axis rotation about axis a.
double single_axis_angle(int a, const Mat3& M) {
    int i1 = (a + 1) % 3, i2 = (a + 2) % 3;
    return std::atan2(M.at(i2, i1), M.at(i1, i1));
}

}  // namespace

double rotation_residual(const Mat3& R) {
    Mat3 G = R.transposed() * R;
    double worst = 0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            worst = std::max(worst, std::abs(G.at(r, c) - (r == c ? 1.0 : 0.0)));
    double det = R.m[0] * (R.m[4] * R.m[8] - R.m[5] * R.m[7]) -
                 R.m[1] * (R.m[3] * R.m[8] - R.m[5] * R.m[6]) +
                 R.m[2] * (R.m[3] * R.m[7] - R.m[4] * R.m[6]);
    return std::max(worst, std::abs(det - 1.0));
}

Mat3 rot6d_to_matrix(const Rot6& r) {
    Mat3 R;
    kernels::rot6d_forward(r.data(), 1, R.m.data(), 1e-8);
    return R;
}

Rot6 matrix_to_rot6d(const Mat3& R) {
    if (rotation_residual(R) > 1e-4)
        throw std::invalid_argument("matrix_to_rot6d: input is not a rotation matrix");
    return {R.m[0], R.m[3], R.m[6], R.m[1], R.m[4], R.m[7]};
}

Quat matrix_to_quat(const Mat3& R) {
    if (rotation_residual(R) > 1e-4)
        throw std::invalid_argument("matrix_to_quat: input is not a rotation matrix");
    const auto& m = R.m;
    double trace = m[0] + m[4] + m[8];
    Quat q;
    if (trace > 0) {
        double s = std::sqrt(trace + 1.0) * 2;
        q.w = 0.25 * s;
        q.x = (m[7] - m[5]) / s;
        q.y = (m[2] - m[6]) / s;
        q.z = (m[3] - m[1]) / s;
    } else if (m[0] > m[4] && m[0] > m[8]) {
        double s = std::sqrt(1.0 + m[0] - m[4] - m[8]) * 2;
        q.w = (m[7] - m[5]) / s;
        q.x = 0.25 * s;
        q.y = (m[1] + m[3]) / s;
        q.z = (m[2] + m[6]) / s;
    } else if (m[4] > m[8]) {
        double s = std::sqrt(1.0 + m[4] - m[0] - m[8]) * 2;
        q.w = (m[2] - m[6]) / s;
        q.x = (m[1] + m[3]) / s;
        q.y = 0.25 * s;
        q.z = (m[5] + m[7]) / s;
    } else {
        double s = std::sqrt(1.0 + m[8] - m[0] - m[4]) * 2;
        q.w = (m[3] - m[1]) / s;
        q.x = (m[2] + m[6]) / s;
        q.y = (m[5] + m[7]) / s;
        q.z = 0.25 * s;
    }
    q = quat_normalized(q);
    // hemisphere canonicalization, total order for the w = 0 boundary
    bool flip = q.w < 0;
    if (q.w == 0) {
        if (q.x != 0) flip = q.x < 0;
        else if (q.y != 0) flip = q.y < 0;
        else flip = q.z < 0;
    }
    if (flip) {
        q.w = -q.w;
        q.x = -q.x;
        q.y = -q.y;
        q.z = -q.z;
    }
    return q;
}

Mat3 quat_to_matrix(const Quat& q) {
    double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 R;
    R.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
           2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
           2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
    return R;
}

Quat quat_normalized(const Quat& q) {
    double n = q.norm();
    if (n < 1e-12) throw std::invalid_argument("quat_normalized: zero quaternion");
    return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Quat slerp(const Quat& q0, const Quat& q1, double t) {
    if (std::abs(q0.norm() - 1.0) > 1e-6 || std::abs(q1.norm() - 1.0) > 1e-6)
        throw std::invalid_argument("slerp: inputs must be unit quaternions");
    Quat b = q1;
    double d = q0.dot(q1);
    if (d < 0) {
        b = {-b.w, -b.x, -b.y, -b.z};
        d = -d;
    }
    double angle = std::acos(clamp1(d));
    double s0, s1;
    if (angle < 1e-7) {
        s0 = 1.0 - t;
        s1 = t;
    } else {
        double sa = std::sin(angle);
        s0 = std::sin((1.0 - t) * angle) / sa;
        s1 = std::sin(t * angle) / sa;
    }
    return quat_normalized(
        {s0 * q0.w + s1 * b.w, s0 * q0.x + s1 * b.x, s0 * q0.y + s1 * b.y, s0 * q0.z + s1 * b.z});
}

Mat3 axis_rotation(char axis, double degrees) {
    double rad = degrees * kPi / 180.0;
    double c = std::cos(rad), s = std::sin(rad);
    Mat3 R;
    switch (axis_index(axis)) {
        case 0: R.m = {1, 0, 0, 0, c, -s, 0, s, c}; break;
        case 1: R.m = {c, 0, s, 0, 1, 0, -s, 0, c}; break;
        default: R.m = {c, -s, 0, s, c, 0, 0, 0, 1}; break;
    }
    return R;
}

std::array<double, 3> matrix_to_euler(const Mat3& R, const char order[3]) {
    int a = axis_index(order[0]), b = axis_index(order[1]), c = axis_index(order[2]);
    if (a == b || b == c || a == c)
        throw std::invalid_argument("matrix_to_euler: axes must be distinct");
    double sign = (b == (a + 1) % 3) ? 1.0 : -1.0;  // permutation parity
    double s2 = clamp1(sign * R.at(a, c));
    double t1, t2, t3;
    if (std::abs(s2) > 1.0 - 1e-9) {
        // gimbal lock: fold the third angle into the first
        t2 = std::asin(s2);
        t3 = 0;
        Mat3 M = R * axis_rotation(order[1], -s2 * 90.0);
        t1 = single_axis_angle(a, M);
    } else {
        t2 = std::asin(s2);
        t1 = std::atan2(-sign * R.at(b, c), R.at(c, c));
        t3 = std::atan2(-sign * R.at(a, b), R.at(a, a));
    }
    constexpr double kDeg = 180.0 / kPi;
    return {t1 * kDeg, t2 * kDeg, t3 * kDeg};
}

Mat3 random_rotation(RandomStream& rng) {
    Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    return quat_to_matrix(quat_normalized(q));
}

}  // namespace mp
