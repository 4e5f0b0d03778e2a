#include "motion_prior/skeleton.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <stdexcept>

namespace mp {

int Skeleton::root() const {
    int r = -1;
    for (int j = 0; j < joint_count(); ++j)
        if (joints[j].parent < 0) {
            if (r >= 0) throw std::invalid_argument("skeleton has more than one root");
            r = j;
        }
    if (r < 0) throw std::invalid_argument("skeleton has no root");
    return r;
}

int Skeleton::find(const std::string& name) const {
    for (int j = 0; j < joint_count(); ++j)
        if (joints[j].name == name) return j;
    return -1;
}

std::vector<int> Skeleton::parents() const {
    std::vector<int> p(joints.size());
    for (size_t j = 0; j < joints.size(); ++j) p[j] = joints[j].parent;
    return p;
}

std::vector<std::vector<int>> Skeleton::children() const {
    std::vector<std::vector<int>> ch(joints.size());
    for (int j = 0; j < joint_count(); ++j)
        if (joints[j].parent >= 0) ch[joints[j].parent].push_back(j);
    return ch;
}

std::vector<int> Skeleton::topo_order() const {
    auto ch = children();
    std::vector<int> order;
    order.reserve(joints.size());
    std::deque<int> queue{root()};
    while (!queue.empty()) {
        int j = queue.front();
        queue.pop_front();
        order.push_back(j);
        for (int c : ch[j]) queue.push_back(c);
    }
    if (order.size() != joints.size())
        throw std::invalid_argument("skeleton parent links do not form a tree");
    return order;
}

void Skeleton::validate() const {
    if (joints.empty()) throw std::invalid_argument("skeleton is empty");
    for (const auto& j : joints) {
        if (j.parent >= joint_count()) throw std::invalid_argument("parent index out of range");
        if (!finite(j.offset.x) || !finite(j.offset.y) || !finite(j.offset.z))
            throw std::invalid_argument("joint offset not finite");
    }
    topo_order();  // throws on multiple roots or cycles
}

Skeleton Skeleton::toy7() {
    Skeleton s;
    s.joints = {
        {"root", -1, {0, 0, 0}},        {"spine", 0, {0, 0.20, 0}},
        {"head", 1, {0, 0.15, 0}},      {"l_upper_arm", 1, {0.20, 0, 0}},
        {"l_lower_arm", 3, {0.25, 0, 0}}, {"r_upper_arm", 1, {-0.20, 0, 0}},
        {"r_lower_arm", 5, {-0.25, 0, 0}},
    };
    return s;
}

Skeleton Skeleton::smpl24() {
    Skeleton s;
    s.joints = {
        {"pelvis", -1, {0, 0, 0}},
        {"l_hip", 0, {0.07, -0.09, 0}},
        {"r_hip", 0, {-0.07, -0.09, 0}},
        {"spine1", 0, {0, 0.11, 0}},
        {"l_knee", 1, {0.02, -0.38, 0}},
        {"r_knee", 2, {-0.02, -0.38, 0}},
        {"spine2", 3, {0, 0.13, 0}},
        {"l_ankle", 4, {-0.01, -0.40, 0}},
        {"r_ankle", 5, {0.01, -0.40, 0}},
        {"spine3", 6, {0, 0.05, 0}},
        {"l_foot", 7, {0.02, -0.06, 0.12}},
        {"r_foot", 8, {-0.02, -0.06, 0.12}},
        {"neck", 9, {0, 0.21, 0}},
        {"l_collar", 9, {0.08, 0.11, 0}},
        {"r_collar", 9, {-0.08, 0.11, 0}},
        {"head", 12, {0, 0.07, 0}},
        {"l_shoulder", 13, {0.10, 0.02, 0}},
        {"r_shoulder", 14, {-0.10, 0.02, 0}},
        {"l_elbow", 16, {0.26, 0, 0}},
        {"r_elbow", 17, {-0.26, 0, 0}},
        {"l_wrist", 18, {0.25, 0, 0}},
        {"r_wrist", 19, {-0.25, 0, 0}},
        {"l_hand", 20, {0.08, 0, 0}},
        {"r_hand", 21, {-0.08, 0, 0}},
    };
    return s;
}

namespace {

// Shared-joint adjacency over nodes described by their incident joint sets.
void connect_by_incidence(BoneGraph& g) {
    g.adj.assign(g.count, {});
    for (int u = 0; u < g.count; ++u)
        for (int v = u + 1; v < g.count; ++v) {
            bool share = false;
            for (int ju : g.incident[u]) {
                for (int jv : g.incident[v])
                    if (ju == jv) {
                        share = true;
                        break;
                    }
                if (share) break;
            }
            if (share) {
                g.adj[u].push_back(v);
                g.adj[v].push_back(u);
            }
        }
    for (auto& a : g.adj) std::sort(a.begin(), a.end());
}

std::vector<int> joint_bfs_order(const Skeleton& s) {
    auto ch = s.children();
    std::vector<int> order;
    std::deque<int> queue{s.root()};
    while (!queue.empty()) {
        int j = queue.front();
        queue.pop_front();
        order.push_back(j);
        for (int c : ch[j]) queue.push_back(c);
    }
    return order;
}

}  // namespace

BoneGraph BoneGraph::bones_of(const Skeleton& s) {
    s.validate();
    BoneGraph g;
    g.joint_bfs = joint_bfs_order(s);
    for (int j = 0; j < s.joint_count(); ++j) {
        if (s.joints[j].parent < 0) continue;
        g.incident.push_back({s.joints[j].parent, j});
        g.count++;
    }
    connect_by_incidence(g);
    return g;
}

BoneGraph BoneGraph::channels_of(const Skeleton& s) {
    s.validate();
    BoneGraph g;
    g.joint_bfs = joint_bfs_order(s);
    g.count = s.joint_count();
    g.incident.resize(g.count);
    for (int j = 0; j < s.joint_count(); ++j) {
        if (s.joints[j].parent < 0)
            g.incident[j] = {j};  // the root channel touches the root joint only
        else
            g.incident[j] = {s.joints[j].parent, j};
    }
    connect_by_incidence(g);
    return g;
}

NeighborTable neighbors_within(const BoneGraph& g, int d) {
    if (d < 0) throw std::invalid_argument("neighbors_within: d must be non-negative");
    NeighborTable nt;
    nt.d = d;
    nt.sets.resize(g.count);
    for (int i = 0; i < g.count; ++i) {
        std::vector<int> dist(g.count, -1);
        std::deque<int> queue{i};
        dist[i] = 0;
        while (!queue.empty()) {
            int u = queue.front();
            queue.pop_front();
            if (dist[u] == d) continue;
            for (int v : g.adj[u])
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
        }
        for (int j = 0; j < g.count; ++j)
            if (dist[j] >= 0) nt.sets[i].push_back(j);
    }
    return nt;
}

NeighborTable neighbors_within(const Skeleton& s, int d) {
    return neighbors_within(BoneGraph::bones_of(s), d);
}

PoolingPlan build_pooling_plan(const BoneGraph& g) {
    PoolingPlan plan;
    plan.source_count = g.count;
    // nodes incident to each joint
    std::set<int> joints_present;
    for (const auto& inc : g.incident) joints_present.insert(inc.begin(), inc.end());
    std::vector<std::vector<int>> at_joint;
    int max_joint = joints_present.empty() ? -1 : *joints_present.rbegin();
    at_joint.resize(max_joint + 1);
    for (int u = 0; u < g.count; ++u)
        for (int j : g.incident[u]) at_joint[j].push_back(u);

    std::vector<int> group_of(g.count, -1);
    // root-outward scan: a joint of degree 2 merges its two bones
    for (int j : g.joint_bfs) {
        if (j > max_joint || at_joint[j].size() != 2) continue;
        int u = at_joint[j][0], v = at_joint[j][1];
        if (group_of[u] >= 0 || group_of[v] >= 0) continue;
        int id = static_cast<int>(plan.groups.size());
        plan.groups.push_back({std::min(u, v), std::max(u, v)});
        group_of[u] = group_of[v] = id;
    }
    for (int u = 0; u < g.count; ++u)
        if (group_of[u] < 0) {
            group_of[u] = static_cast<int>(plan.groups.size());
            plan.groups.push_back({u});
        }
    std::sort(plan.groups.begin(), plan.groups.end());

    plan.merged.count = static_cast<int>(plan.groups.size());
    plan.merged.joint_bfs = g.joint_bfs;
    plan.merged.incident.resize(plan.merged.count);
    for (int gi = 0; gi < plan.merged.count; ++gi) {
        std::set<int> inc;
        for (int u : plan.groups[gi]) inc.insert(g.incident[u].begin(), g.incident[u].end());
        plan.merged.incident[gi].assign(inc.begin(), inc.end());
    }
    connect_by_incidence(plan.merged);
    return plan;
}

PoolingPlan build_pooling_plan(const Skeleton& s) {
    return build_pooling_plan(BoneGraph::bones_of(s));
}

kernels::ConvTopology conv_topology(const NeighborTable& nt) {
    kernels::ConvTopology topo;
    topo.bones = static_cast<int>(nt.sets.size());
    topo.offsets.resize(topo.bones + 1, 0);
    for (int i = 0; i < topo.bones; ++i) {
        topo.offsets[i + 1] = topo.offsets[i] + static_cast<int>(nt.sets[i].size());
        for (int j : nt.sets[i]) topo.nbr.push_back(j);
    }
    topo.build_reverse();
    return topo;
}

}  // namespace mp
