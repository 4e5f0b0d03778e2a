#pragma once

// Applications of a frozen motion model: sliding-window refinement of long
// sequences, and constraint-driven synthesis (in-betweening, partial-body
// completion) by optimizing latents first and decoder weights second.

#include <string>
#include <utility>
#include <vector>

#include "motion_prior/data.hpp"
#include "motion_prior/hmvae.hpp"

namespace mp {

// Known entries are the product of the two axes: (t, j) is constrained when
// frames[t] and joints[j] are both set. An empty axis means "all of them".
// targets holds the full [T x J x 6] rotation rows; only constrained entries
// are ever read.
struct ConstraintMask {
    std::vector<char> frames;
    std::vector<char> joints;
    std::vector<double> targets;
};

// Frames [0, lead) and [T - trail, T) constrained, every joint.
ConstraintMask make_keyframe_mask(int T, int lead, int trail);

// Every frame, the named joint set. "upper" drops leg chains by name,
// "all" keeps everything.
ConstraintMask make_body_part_mask(const Skeleton& skeleton, const std::string& part);

struct OptimConfig {
    int phase1_iters = 50;   // latent descent, decoder frozen
    int phase2_iters = 100;  // decoder descent, latents frozen
    double lambda1 = 10.0;   // joint-position weight inside the data term
    double lambda2 = 1.0;    // decoder-drift weight in phase 2
    double lr1 = 0.05;
    double lr2 = 1e-3;
    bool plain_sgd = false;  // momentum-free descent instead of Adam
    int restarts = 1;        // independent phase-1 draws; best one continues
    uint64_t seed = 0;
};

struct OptimRow {
    int iter = 0;
    int phase = 1;
    double rec_6d = 0, rec_rot = 0, rec_joints = 0, reg = 0, total = 0;
};

struct OptimResult {
    MotionWindow window;         // decoded rotations; root track left at zero
    std::vector<OptimRow> trace; // best restart's phase 1, then phase 2
};

// Latent draw order per restart: z_l first when the model has a local path,
// then z_g, each coordinate via RandomStream::normal().
OptimResult optimize_latent(const HmVae& model, const ConstraintMask& mask,
                            const OptimConfig& cfg);

std::string optim_trace_jsonl(const std::vector<OptimRow>& trace);

// Slide the model window one frame at a time, decode from posterior means,
// and keep each window's center frame; the first and last half-windows come
// from the terminal windows. Root translations pass through unchanged.
MotionClip refine_sequence(const HmVae& model, const MotionClip& noisy);

// Interpolation baseline over a keyframe gap: "slerp" rotates along the
// quaternion arc between the boundary frames, "lerp" is componentwise linear
// on the 6D rows. The root track is linear in both.
MotionWindow keyframe_baseline(const MotionWindow& w, int lead, int trail,
                               const std::string& method);

}  // namespace mp
