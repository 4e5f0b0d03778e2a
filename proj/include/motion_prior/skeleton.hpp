#pragma once

// Skeleton topology algebra. Feature tensors carry one channel per joint:
// each non-root joint's channel is its bone (the segment from its parent),
// and the root joint's channel is the global rotation, treated as a virtual
// bone incident to the root joint only. Two channels are adjacent when their
// segments share a joint, which makes siblings distance-1 neighbors.

#include <string>
#include <vector>

#include "motion_prior/rotation.hpp"
#include "motion_prior/tensor.hpp"

namespace mp {

struct Joint {
    std::string name;
    int parent = -1;  // -1 marks the root
    Vec3 offset;      // meters, relative to parent
};

struct Skeleton {
    std::vector<Joint> joints;

    int joint_count() const { return static_cast<int>(joints.size()); }
    int root() const;
    int find(const std::string& name) const;  // -1 when absent
    std::vector<int> parents() const;
    std::vector<std::vector<int>> children() const;
    std::vector<int> topo_order() const;  // parents before children
    void validate() const;                // single root, acyclic, finite offsets

    static Skeleton toy7();
    static Skeleton smpl24();
};

// Undirected bone-level graph at one pooling level.
struct BoneGraph {
    int count = 0;
    std::vector<std::vector<int>> adj;       // sorted distance-1 neighbors, no self
    std::vector<std::vector<int>> incident;  // skeleton joints each node touches
    std::vector<int> joint_bfs;              // joints in breadth-first order from the root

    // Nodes are the non-root joints' bones, indexed densely in joint order.
    static BoneGraph bones_of(const Skeleton& s);
    // Nodes are all J joint channels (node index = joint index).
    static BoneGraph channels_of(const Skeleton& s);
};

struct NeighborTable {
    int d = 0;
    std::vector<std::vector<int>> sets;  // sorted, self included
};

NeighborTable neighbors_within(const BoneGraph& g, int d);
NeighborTable neighbors_within(const Skeleton& s, int d);  // over bones_of(s)

struct PoolingPlan {
    int source_count = 0;
    std::vector<std::vector<int>> groups;  // disjoint cover, ordered by smallest member
    BoneGraph merged;
};

PoolingPlan build_pooling_plan(const BoneGraph& g);
PoolingPlan build_pooling_plan(const Skeleton& s);  // over bones_of(s)

// Flatten a neighbor table for the conv kernels; pair order follows the
// table's sorted sets, so parameter layout is reproducible.
kernels::ConvTopology conv_topology(const NeighborTable& nt);

// ---- differentiable skeleton ops ----

// x [T x B x Cin], w [P x k x Cin x Cout], b [P x Cout] with P = total pairs.
template <class S>
Tensor<S> skeleton_conv(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                        const kernels::ConvTopology& topo, int stride, Padding pad) {
    if (x.shape().size() != 3 || w.shape().size() != 4)
        throw std::invalid_argument("skeleton_conv: expects x [T x B x C], w [P x k x Cin x Cout]");
    int T = x.shape()[0], B = x.shape()[1], Cin = x.shape()[2];
    int P = w.shape()[0], k = w.shape()[1], Cout = w.shape()[3];
    if (B != topo.bones) throw std::invalid_argument("skeleton_conv: bone count mismatch");
    if (P != topo.pairs())
        throw std::invalid_argument("skeleton_conv: missing weight for a neighbor pair (have " +
                                    std::to_string(P) + ", need " + std::to_string(topo.pairs()) +
                                    ")");
    if (w.shape()[2] != Cin) throw std::invalid_argument("skeleton_conv: channel mismatch");
    if (b.shape().size() != 2 || b.shape()[0] != P || b.shape()[1] != Cout)
        throw std::invalid_argument("skeleton_conv: bias must be [P x Cout]");
    int Tout = kernels::conv1d_out_len(T, k, stride, pad);
    int pl = kernels::conv1d_pad_left(T, k, stride, pad);
    std::vector<S> v(static_cast<size_t>(Tout) * B * Cout);
    kernels::skel_conv_forward(x.data(), T, B, Cin, w.data(), b.data(), k, Cout, stride, pl, topo,
                               v.data(), Tout);
    const kernels::ConvTopology* tp = &topo;  // topologies outlive the graph (owned by the model)
    return detail::make_op<S>({Tout, B, Cout}, std::move(v), {x, w, b},
                              [T, B, Cin, k, Cout, stride, pl, Tout, tp](Node<S>& n) {
                                  auto& X = *n.parents[0];
                                  auto& W = *n.parents[1];
                                  auto& Bb = *n.parents[2];
                                  const S* dy = n.grad.data();
                                  if (X.requires_grad)
                                      kernels::skel_conv_backward_input(
                                          dy, Tout, B, Cout, W.value.data(), k, Cin, stride, pl,
                                          *tp, X.grad_buffer().data(), T);
                                  if (W.requires_grad || Bb.requires_grad) {
                                      std::vector<S> dump;
                                      S* dw = W.requires_grad ? W.grad_buffer().data() : nullptr;
                                      S* db = Bb.requires_grad ? Bb.grad_buffer().data() : nullptr;
                                      if (!dw) {
                                          dump.assign(W.value.size(), S(0));
                                          dw = dump.data();
                                      }
                                      std::vector<S> dump2;
                                      if (!db) {
                                          dump2.assign(Bb.value.size(), S(0));
                                          db = dump2.data();
                                      }
                                      kernels::skel_conv_backward_weight(X.value.data(), T, B, Cin,
                                                                         dy, Tout, Cout, k, stride,
                                                                         pl, *tp, dw, db);
                                  }
                              });
}

// x [T x B x C] -> [T x m x C], group means.
template <class S>
Tensor<S> skeleton_pool(const Tensor<S>& x, const PoolingPlan& plan) {
    if (x.shape().size() != 3 || x.shape()[1] != plan.source_count)
        throw std::invalid_argument("skeleton_pool: input " + shape_string(x.shape()) +
                                    " does not match plan over " +
                                    std::to_string(plan.source_count) + " bones");
    int T = x.shape()[0], B = x.shape()[1], C = x.shape()[2];
    int m = static_cast<int>(plan.groups.size());
    std::vector<S> v(static_cast<size_t>(T) * m * C, S(0));
    const S* px = x.data();
    for (int t = 0; t < T; ++t)
        for (int g = 0; g < m; ++g) {
            S inv = S(1) / static_cast<S>(plan.groups[g].size());
            S* out = v.data() + (static_cast<int64_t>(t) * m + g) * C;
            for (int j : plan.groups[g]) {
                const S* in = px + (static_cast<int64_t>(t) * B + j) * C;
                for (int c = 0; c < C; ++c) out[c] += in[c] * inv;
            }
        }
    const PoolingPlan* pp = &plan;
    return detail::make_op<S>({T, m, C}, std::move(v), {x}, [T, B, C, m, pp](Node<S>& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& g = n.parents[0]->grad_buffer();
        for (int t = 0; t < T; ++t)
            for (int gi = 0; gi < m; ++gi) {
                S inv = S(1) / static_cast<S>(pp->groups[gi].size());
                const S* dy = n.grad.data() + (static_cast<int64_t>(t) * m + gi) * C;
                for (int j : pp->groups[gi])
                    for (int c = 0; c < C; ++c)
                        g[(static_cast<int64_t>(t) * B + j) * C + c] += dy[c] * inv;
            }
    });
}

// x [T x m x C] -> [T x B x C], copy each group feature to its members.
template <class S>
Tensor<S> skeleton_unpool(const Tensor<S>& x, const PoolingPlan& plan) {
    int m = static_cast<int>(plan.groups.size());
    if (x.shape().size() != 3 || x.shape()[1] != m)
        throw std::invalid_argument("skeleton_unpool: input " + shape_string(x.shape()) +
                                    " does not match plan with " + std::to_string(m) + " groups");
    int T = x.shape()[0], C = x.shape()[2];
    int B = plan.source_count;
    std::vector<S> v(static_cast<size_t>(T) * B * C);
    const S* px = x.data();
    for (int t = 0; t < T; ++t)
        for (int g = 0; g < m; ++g) {
            const S* in = px + (static_cast<int64_t>(t) * m + g) * C;
            for (int j : plan.groups[g]) {
                S* out = v.data() + (static_cast<int64_t>(t) * B + j) * C;
                for (int c = 0; c < C; ++c) out[c] = in[c];
            }
        }
    const PoolingPlan* pp = &plan;
    return detail::make_op<S>({T, B, C}, std::move(v), {x}, [T, B, C, m, pp](Node<S>& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& g = n.parents[0]->grad_buffer();
        for (int t = 0; t < T; ++t)
            for (int gi = 0; gi < m; ++gi) {
                S* dx = g.data() + (static_cast<int64_t>(t) * m + gi) * C;
                for (int j : pp->groups[gi]) {
                    const S* dy = n.grad.data() + (static_cast<int64_t>(t) * B + j) * C;
                    for (int c = 0; c < C; ++c) dx[c] += dy[c];
                }
            }
    });
}

}  // namespace mp
