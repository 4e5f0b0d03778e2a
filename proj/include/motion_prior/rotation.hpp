#pragma once

// Rotation representations: continuous 6D, 3x3 matrices, quaternions, Slerp.
// Plain double-precision structs for data handling and metrics, plus the
// differentiable 6D -> matrix tensor op used inside the model graph.

#include <array>
#include <cmath>

#include "motion_prior/common.hpp"
#include "motion_prior/tensor.hpp"

namespace mp {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
};

// Row-major 3x3.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return {}; }
    double& at(int r, int c) { return m[3 * r + c]; }
    double at(int r, int c) const { return m[3 * r + c]; }

    Mat3 operator*(const Mat3& o) const {
        Mat3 out;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                out.m[3 * r + c] = m[3 * r] * o.m[c] + m[3 * r + 1] * o.m[3 + c] +
                                   m[3 * r + 2] * o.m[6 + c];
        return out;
    }
    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }
    Mat3 transposed() const {
        Mat3 out;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out.m[3 * r + c] = m[3 * c + r];
        return out;
    }
    Vec3 col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }
};

struct Quat {
    double w = 1, x = 0, y = 0, z = 0;

    double dot(const Quat& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
};

using Rot6 = std::array<double, 6>;

// How far a matrix is from the rotation group (orthonormality + det residual).
double rotation_residual(const Mat3& R);

Mat3 rot6d_to_matrix(const Rot6& r);     // throws on degenerate input
Rot6 matrix_to_rot6d(const Mat3& R);     // throws if R is not a rotation
Quat matrix_to_quat(const Mat3& R);      // hemisphere-canonical, w >= 0
Mat3 quat_to_matrix(const Quat& q);
Quat quat_normalized(const Quat& q);
Quat slerp(const Quat& q0, const Quat& q1, double t);

// Rotation about one axis; axis in {'X','Y','Z'}, angle in degrees.
Mat3 axis_rotation(char axis, double degrees);

// Factor R into per-axis angles (degrees) such that composing rotations in
// the given axis order (e.g. "ZXY", left to right) reproduces R.
std::array<double, 3> matrix_to_euler(const Mat3& R, const char order[3]);

// Uniform random rotation via normalized 4-normal quaternion sampling.
Mat3 random_rotation(RandomStream& rng);

// ---- differentiable 6D -> matrix, rows of 6 to rows of 9 ----

template <class S>
Tensor<S> rot6d_to_matrix_op(const Tensor<S>& r6) {
    if (r6.shape().empty() || r6.shape().back() != 6)
        throw std::invalid_argument("rot6d_to_matrix: last axis must be 6, got " +
                                    shape_string(r6.shape()));
    int N = static_cast<int>(r6.numel() / 6);
    std::vector<int> shape(r6.shape());
    shape.back() = 9;
    std::vector<S> v(static_cast<size_t>(N) * 9);
    kernels::rot6d_forward(r6.data(), N, v.data(), static_cast<S>(1e-8));
    return detail::make_op<S>(std::move(shape), std::move(v), {r6}, [N](Node<S>& n) {
        if (!n.parents[0]->requires_grad) return;
        kernels::rot6d_backward(n.parents[0]->value.data(), N, n.grad.data(),
                                n.parents[0]->grad_buffer().data());
    });
}

}  // namespace mp
