#pragma once

// Root-trajectory model. A stack of stride-1 skeleton convolutions over
// root-local joint positions predicts a per-frame root velocity, and an
// inclusive running sum turns velocities into a trajectory. No temporal
// downsampling anywhere: every layer keeps all T frames.

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "motion_prior/data.hpp"
#include "motion_prior/kinematics.hpp"

namespace mp {

struct TrajectoryDescriptor {
    std::array<int, 4> channels{16, 16, 16, 16};
    int d = 1;               // neighborhood radius of each skeleton conv
    int k = 3;               // temporal kernel width
    double leaky_slope = 0.2;

    static TrajectoryDescriptor toy();
};

// velocities in meters per frame; positions are the running sum, so they are
// displacements from the window start (the caller adds the world position of
// frame 0 when an absolute track is needed).
struct Trajectory {
    Tensor<double> velocities;  // [T x 3]
    Tensor<double> positions;   // [T x 3]
};

class TrajectoryNet {
  public:
    TrajectoryNet(Skeleton skeleton, TrajectoryDescriptor desc, RandomStream& rng);

    const Skeleton& skeleton() const { return skel_; }
    const TrajectoryDescriptor& desc() const { return desc_; }

    // positions [T x J x 3] -> velocities [T x 3], differentiable
    Tensor<double> forward(const Tensor<double>& positions) const;

    std::vector<Tensor<double>> parameters() const;

  private:
    Tensor<double> new_param(std::vector<int> shape, double bound, RandomStream& rng);

    Skeleton skel_;
    TrajectoryDescriptor desc_;
    std::vector<BoneGraph> graphs_;
    std::vector<PoolingPlan> plans_;
    std::vector<kernels::ConvTopology> topos_;
    Tensor<double> conv_w_[4], conv_b_[4];
    Tensor<double> head_w_, head_b_;
};

Tensor<double> predict_root_velocity(const TrajectoryNet& model, const Tensor<double>& positions);

// G_t = sum_{i<=t} V_i; the first output row equals the first input row.
Tensor<double> integrate_trajectory(const Tensor<double>& velocities);

Trajectory predict_trajectory(const TrajectoryNet& model, const Tensor<double>& positions);

// sum_t |V'-V|^2 + sum_t |G'-G|^2, unweighted
Tensor<double> trajectory_loss(const Tensor<double>& v_pred, const Tensor<double>& v_ref,
                               const Tensor<double>& g_pred, const Tensor<double>& g_ref);

// Training targets from a window's root track: velocities are the frame
// differences with a zero first row (frame 0 has no predecessor), positions
// are displacements from frame 0. Integrating the velocities reproduces the
// positions.
std::pair<Tensor<double>, Tensor<double>> root_motion_targets(const MotionWindow& w);

// Forward kinematics with the root pinned at the origin; the network input.
Tensor<double> local_positions(const MotionWindow& w, const Skeleton& skeleton);

struct TrajectoryTrainConfig {
    int batch = 4;
    int iters = 300;
    double lr = 2e-3;
    uint64_t seed = 0;
};

struct TrajectoryLossRow {
    int iter = 0;
    double total = 0, velocity = 0, position = 0;
};

std::vector<TrajectoryLossRow> train_trajectory(TrajectoryNet& model,
                                                const std::vector<MotionWindow>& data,
                                                const TrajectoryTrainConfig& cfg);

std::string trajectory_log_csv(const std::vector<TrajectoryLossRow>& log);

// columns: t,vx,vy,vz,gx,gy,gz
std::string trajectory_csv(const Trajectory& t);

}  // namespace mp
