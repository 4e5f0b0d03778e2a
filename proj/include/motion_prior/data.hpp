#pragma once

// Motion ingestion and generation: BVH files, a CSV fallback for estimator
// outputs, deterministic synthetic clips, windowing, and augmentation.

#include <string>
#include <vector>

#include "motion_prior/kinematics.hpp"

namespace mp {

struct MotionClip {
    Skeleton skeleton;
    std::vector<Pose> frames;
    double fps = 30.0;

    int frame_count() const { return static_cast<int>(frames.size()); }
};

// Per-joint file layout captured at parse time so writing reproduces the
// original structure (channel order, end sites).
struct BvhJointMeta {
    std::vector<std::string> channels;
    bool has_end_site = false;
    Vec3 end_site_offset;  // meters
};

struct BvhMeta {
    std::vector<BvhJointMeta> joints;
    double unit_scale = 0.01;
};

// unit_scale converts OFFSET/position units to meters (0.01 for cm files).
MotionClip parse_bvh(const std::string& text, double unit_scale = 0.01, BvhMeta* meta = nullptr);
std::string write_bvh(const MotionClip& clip, const BvhMeta* meta = nullptr);

// frame-per-row text format: frame,root_tx,root_ty,root_tz,j0_r0..j0_r5,...
std::string write_motion_csv(const MotionClip& clip);
MotionClip parse_motion_csv(const std::string& text, const Skeleton& skeleton, double fps = 30.0);

struct SynthConfig {
    uint64_t seed = 0;
    std::string preset = "toy-7";  // toy-7 | smpl-24
    int length = 64;
    double fps = 30.0;
    double freq_min = 0.04, freq_max = 0.12;  // cycles per frame
    double amp_min_deg = 10.0, amp_max_deg = 45.0;
};

std::vector<MotionClip> synth_dataset(const SynthConfig& cfg, int n);

Skeleton skeleton_preset(const std::string& name);

// Fixed-length slice of a clip, rotations as 6D rows plus the root track.
struct MotionWindow {
    int T = 0, J = 0;
    std::vector<double> rot6;      // T*J*6
    std::vector<double> root_pos;  // T*3, meters
};

std::vector<MotionWindow> window(const MotionClip& clip, int T, int stride);
MotionWindow clip_to_window(const MotionClip& clip);  // whole clip as one window

// Rebuild poses from 6D rows (projecting back onto the rotation group).
MotionClip window_to_clip(const MotionWindow& w, const Skeleton& skeleton, double fps);

struct AugmentConfig {
    std::vector<int> rate_factors{1, 2, 4};
    bool rotate = true;
    uint64_t seed = 0;
};

MotionClip augment(const MotionClip& clip, const AugmentConfig& cfg);

}  // namespace mp
