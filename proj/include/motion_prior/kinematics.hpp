#pragma once

// Forward kinematics: local joint rotations + root translation to world-space
// joint positions, as a plain function on poses and as a differentiable op.

#include <vector>

#include "motion_prior/skeleton.hpp"

namespace mp {

struct Pose {
    std::vector<Mat3> rotations;  // one per joint; the root entry is the global rotation
    Vec3 root_translation;
};

inline std::vector<Vec3> forward_kinematics(const Pose& pose, const Skeleton& skel) {
    int J = skel.joint_count();
    if (static_cast<int>(pose.rotations.size()) != J)
        throw std::invalid_argument("forward_kinematics: pose has " +
                                    std::to_string(pose.rotations.size()) + " rotations for " +
                                    std::to_string(J) + " joints");
    std::vector<double> rot(static_cast<size_t>(J) * 9), offs(static_cast<size_t>(J) * 3);
    for (int j = 0; j < J; ++j) {
        for (int e = 0; e < 9; ++e) rot[9 * j + e] = pose.rotations[j].m[e];
        offs[3 * j + 0] = skel.joints[j].offset.x;
        offs[3 * j + 1] = skel.joints[j].offset.y;
        offs[3 * j + 2] = skel.joints[j].offset.z;
    }
    double trans[3] = {pose.root_translation.x, pose.root_translation.y, pose.root_translation.z};
    auto parent = skel.parents();
    auto order = skel.topo_order();
    std::vector<double> pos(static_cast<size_t>(J) * 3);
    kernels::fk_forward(rot.data(), trans, 1, J, parent.data(), order.data(), offs.data(),
                        pos.data());
    std::vector<Vec3> out(J);
    for (int j = 0; j < J; ++j) out[j] = {pos[3 * j], pos[3 * j + 1], pos[3 * j + 2]};
    return out;
}

// rotmats [T x J x 9] (row-major 3x3 per joint), root_trans [T x 3] or a
// default-constructed tensor for a fixed origin; returns positions [T x J x 3].
template <class S>
Tensor<S> forward_kinematics_op(const Tensor<S>& rotmats, const Tensor<S>& root_trans,
                                const Skeleton& skel) {
    int J = skel.joint_count();
    if (rotmats.shape().size() != 3 || rotmats.shape()[2] != 9)
        throw std::invalid_argument("forward_kinematics: rotations must be [T x J x 9], got " +
                                    shape_string(rotmats.shape()));
    if (rotmats.shape()[1] != J)
        throw std::invalid_argument("forward_kinematics: rotation count " +
                                    std::to_string(rotmats.shape()[1]) + " for " +
                                    std::to_string(J) + " joints");
    int T = rotmats.shape()[0];
    bool has_trans = root_trans.defined();
    if (has_trans && (root_trans.shape().size() != 2 || root_trans.shape()[0] != T ||
                      root_trans.shape()[1] != 3))
        throw std::invalid_argument("forward_kinematics: root translation must be [T x 3]");
    std::vector<int> parent = skel.parents();
    std::vector<int> order = skel.topo_order();
    std::vector<S> offs(static_cast<size_t>(J) * 3);
    for (int j = 0; j < J; ++j) {
        offs[3 * j + 0] = static_cast<S>(skel.joints[j].offset.x);
        offs[3 * j + 1] = static_cast<S>(skel.joints[j].offset.y);
        offs[3 * j + 2] = static_cast<S>(skel.joints[j].offset.z);
    }
    std::vector<S> v(static_cast<size_t>(T) * J * 3);
    kernels::fk_forward(rotmats.data(), has_trans ? root_trans.data() : nullptr, T, J,
                        parent.data(), order.data(), offs.data(), v.data());
    auto fn = [T, J, parent, order, offs, has_trans](Node<S>& n) {
        auto& R = *n.parents[0];
        Node<S>* Tr = n.parents.size() > 1 ? n.parents[1].get() : nullptr;
        bool need_r = R.requires_grad;
        bool need_t = Tr && Tr->requires_grad;
        if (!need_r && !need_t) return;
        std::vector<S> drot_dump;
        S* drot = nullptr;
        if (need_r) {
            drot = R.grad_buffer().data();
        } else {
            drot_dump.assign(R.value.size(), S(0));
            drot = drot_dump.data();
        }
        kernels::fk_backward(R.value.data(), T, J, parent.data(), order.data(), offs.data(),
                             n.grad.data(), drot, need_t ? Tr->grad_buffer().data() : nullptr);
        (void)has_trans;
    };
    if (has_trans)
        return detail::make_op<S>({T, J, 3}, std::move(v), {rotmats, root_trans}, fn);
    return detail::make_op<S>({T, J, 3}, std::move(v), {rotmats}, fn);
}

template <class S>
Tensor<S> forward_kinematics_op(const Tensor<S>& rotmats, const Skeleton& skel) {
    return forward_kinematics_op(rotmats, Tensor<S>(), skel);
}

}  // namespace mp
