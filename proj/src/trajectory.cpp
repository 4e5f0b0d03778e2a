#include "motion_prior/trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "motion_prior/optim.hpp"

namespace mp {

TrajectoryDescriptor TrajectoryDescriptor::toy() {
    TrajectoryDescriptor d;
    d.channels = {8, 8, 8, 8};
    return d;
}

TrajectoryNet::TrajectoryNet(Skeleton skeleton, TrajectoryDescriptor desc, RandomStream& rng)
    : skel_(std::move(skeleton)), desc_(desc) {
    skel_.validate();
    if (desc_.d < 0 || desc_.k < 1) throw std::invalid_argument("TrajectoryNet: bad descriptor");
    for (int c : desc_.channels)
        if (c < 1) throw std::invalid_argument("TrajectoryNet: channels must be positive");

    graphs_.push_back(BoneGraph::channels_of(skel_));
    for (int i = 0; i < 4; ++i) {
        plans_.push_back(build_pooling_plan(graphs_[i]));
        graphs_.push_back(plans_[i].merged);
    }
    for (int i = 0; i < 4; ++i)
        topos_.push_back(conv_topology(neighbors_within(graphs_[i], desc_.d)));

    for (int i = 0; i < 4; ++i) {
        int cin = i == 0 ? 3 : desc_.channels[i - 1];
        int P = topos_[i].pairs();
        double bound = std::sqrt(1.0 / (desc_.k * cin));
        conv_w_[i] = new_param({P, desc_.k, cin, desc_.channels[i]}, bound, rng);
        conv_b_[i] = new_param({P, desc_.channels[i]}, 0.0, rng);
    }
    int flat = graphs_[4].count * desc_.channels[3];
    head_w_ = new_param({flat, 3}, std::sqrt(1.0 / flat), rng);
    head_b_ = new_param({3}, 0.0, rng);
}

Tensor<double> TrajectoryNet::new_param(std::vector<int> shape, double bound, RandomStream& rng) {
    std::vector<double> v((size_t)product(shape));
    for (auto& x : v) x = bound > 0 ? rng.uniform(-bound, bound) : 0.0;
    auto t = Tensor<double>::from_data(std::move(shape), std::move(v));
    t.set_requires_grad(true);
    return t;
}

Tensor<double> TrajectoryNet::forward(const Tensor<double>& positions) const {
    const auto& s = positions.shape();
    if (s.size() != 3 || s[1] != skel_.joint_count() || s[2] != 3)
        throw std::invalid_argument("TrajectoryNet: expects positions [T x " +
                                    std::to_string(skel_.joint_count()) + " x 3], got " +
                                    shape_string(s));
    int T = s[0];
    Tensor<double> h = positions;
    for (int i = 0; i < 4; ++i) {
        h = skeleton_conv(h, conv_w_[i], conv_b_[i], topos_[i], 1, kernels::Padding::kSame);
        h = leaky_relu(h, desc_.leaky_slope);
        h = skeleton_pool(h, plans_[i]);
    }
    h = reshape(h, {T, graphs_[4].count * desc_.channels[3]});
    return linear(h, head_w_, head_b_);
}

std::vector<Tensor<double>> TrajectoryNet::parameters() const {
    std::vector<Tensor<double>> out;
    for (int i = 0; i < 4; ++i) {
        out.push_back(conv_w_[i]);
        out.push_back(conv_b_[i]);
    }
    out.push_back(head_w_);
    out.push_back(head_b_);
    return out;
}

Tensor<double> predict_root_velocity(const TrajectoryNet& model, const Tensor<double>& positions) {
    return model.forward(positions);
}

Tensor<double> integrate_trajectory(const Tensor<double>& velocities) {
    const auto& s = velocities.shape();
    if (s.size() != 2 || s[1] != 3)
        throw std::invalid_argument("integrate_trajectory: expects [T x 3], got " +
                                    shape_string(s));
    return prefix_sum(velocities);
}

Trajectory predict_trajectory(const TrajectoryNet& model, const Tensor<double>& positions) {
    Trajectory t;
    t.velocities = predict_root_velocity(model, positions);
    t.positions = integrate_trajectory(t.velocities);
    return t;
}

Tensor<double> trajectory_loss(const Tensor<double>& v_pred, const Tensor<double>& v_ref,
                               const Tensor<double>& g_pred, const Tensor<double>& g_ref) {
    return add(sum(square(sub(v_pred, v_ref))), sum(square(sub(g_pred, g_ref))));
}

std::pair<Tensor<double>, Tensor<double>> root_motion_targets(const MotionWindow& w) {
    if (w.T < 1 || (int)w.root_pos.size() != w.T * 3)
        throw std::invalid_argument("root_motion_targets: malformed root track");
    std::vector<double> v((size_t)w.T * 3, 0.0), g((size_t)w.T * 3, 0.0);
    for (int t = 1; t < w.T; ++t)
        for (int e = 0; e < 3; ++e)
            v[3 * t + e] = w.root_pos[3 * t + e] - w.root_pos[3 * (t - 1) + e];
    for (int t = 0; t < w.T; ++t)
        for (int e = 0; e < 3; ++e) g[3 * t + e] = w.root_pos[3 * t + e] - w.root_pos[e];
    return {Tensor<double>::from_data({w.T, 3}, std::move(v)),
            Tensor<double>::from_data({w.T, 3}, std::move(g))};
}

Tensor<double> local_positions(const MotionWindow& w, const Skeleton& skeleton) {
    MotionClip clip = window_to_clip(w, skeleton, 30.0);
    int J = skeleton.joint_count();
    std::vector<double> v((size_t)w.T * J * 3);
    for (int t = 0; t < w.T; ++t) {
        Pose pose = clip.frames[t];
        pose.root_translation = {0, 0, 0};
        auto pos = forward_kinematics(pose, skeleton);
        for (int j = 0; j < J; ++j) {
            v[((size_t)t * J + j) * 3 + 0] = pos[j].x;
            v[((size_t)t * J + j) * 3 + 1] = pos[j].y;
            v[((size_t)t * J + j) * 3 + 2] = pos[j].z;
        }
    }
    return Tensor<double>::from_data({w.T, J, 3}, std::move(v));
}

std::vector<TrajectoryLossRow> train_trajectory(TrajectoryNet& model,
                                                const std::vector<MotionWindow>& data,
                                                const TrajectoryTrainConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("train_trajectory: empty dataset");
    if (cfg.batch < 1 || cfg.iters < 0) throw std::invalid_argument("train_trajectory: bad config");
    const int J = model.skeleton().joint_count();

    std::vector<Tensor<double>> ps, vs, gs;
    for (const auto& w : data) {
        if (w.J != J)
            throw std::invalid_argument("train_trajectory: window does not match the skeleton");
        ps.push_back(local_positions(w, model.skeleton()));
        auto [v, g] = root_motion_targets(w);
        vs.push_back(v);
        gs.push_back(g);
    }

    Adam opt(model.parameters(), cfg.lr);
    RandomStream rng(cfg.seed);
    std::vector<TrajectoryLossRow> log;
    log.reserve(cfg.iters);

    for (int it = 0; it < cfg.iters; ++it) {
        Tensor<double> batch_total;
        TrajectoryLossRow row{it, 0, 0, 0};
        for (int b = 0; b < cfg.batch; ++b) {
            size_t i = rng.index(ps.size());
            auto vp = model.forward(ps[i]);
            auto gp = integrate_trajectory(vp);
            auto lv = sum(square(sub(vp, vs[i])));
            auto lg = sum(square(sub(gp, gs[i])));
            auto total = add(lv, lg);
            batch_total = b == 0 ? total : add(batch_total, total);
            row.velocity += lv.item();
            row.position += lg.item();
            row.total += total.item();
        }
        row.total /= cfg.batch;
        row.velocity /= cfg.batch;
        row.position /= cfg.batch;
        if (!std::isfinite(row.total))
            throw std::runtime_error("train_trajectory: non-finite loss at iteration " +
                                     std::to_string(it) + " (velocity=" +
                                     std::to_string(row.velocity) + ", position=" +
                                     std::to_string(row.position) + ")");
        opt.zero_grad();
        scale(batch_total, 1.0 / cfg.batch).backward();
        opt.step();
        log.push_back(row);
    }
    return log;
}

std::string trajectory_log_csv(const std::vector<TrajectoryLossRow>& log) {
    std::string out = "iter,total,velocity,position\n";
    char buf[128];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", r.iter, r.total, r.velocity,
                      r.position);
        out += buf;
    }
    return out;
}

std::string trajectory_csv(const Trajectory& t) {
    const auto& vs = t.velocities.shape();
    const auto& gs = t.positions.shape();
    if (vs.size() != 2 || vs[1] != 3 || gs != vs)
        throw std::invalid_argument("trajectory_csv: malformed trajectory");
    const double* v = t.velocities.data();
    const double* g = t.positions.data();
    std::string out = "t,vx,vy,vz,gx,gy,gz\n";
    char buf[256];
    for (int i = 0; i < vs[0]; ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", i, v[3 * i],
                      v[3 * i + 1], v[3 * i + 2], g[3 * i], g[3 * i + 1], g[3 * i + 2]);
        out += buf;
    }
    return out;
}

}  // namespace mp
