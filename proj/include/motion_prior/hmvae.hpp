#pragma once

// Two-level motion VAE on the skeleton channel hierarchy, with the ablation
// variants used for comparison runs. Windows are Rot6D tensors [T x J x 6].

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "motion_prior/common.hpp"
#include "motion_prior/data.hpp"
#include "motion_prior/skeleton.hpp"
#include "motion_prior/tensor.hpp"

namespace mp {

enum class Variant : unsigned char { HMVAE = 0, MVAE = 1, TCNVAE = 2 };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // throws on unknown names

struct ArchDescriptor {
    Variant variant = Variant::HMVAE;
    int window = 64;
    std::array<int, 4> strides{2, 2, 2, 2};
    std::array<int, 4> channels{32, 64, 128, 256};
    int d = 1;  // skeleton conv neighborhood distance
    int k = 3;  // temporal kernel width
    int dh_local = 64;
    int dh_global = 64;
    double leaky_slope = 0.2;

    // Desk-scale widths that keep a full training run in seconds.
    static ArchDescriptor toy(int window = 16);
    // Short-window config for per-frame refinement; the strides still reduce
    // the deep level to a single timestep.
    static ArchDescriptor refinement(int window = 8);
};

struct GaussianParams {
    Tensor<double> mu;       // [d_h]
    Tensor<double> log_var;  // [d_h]
    bool defined() const { return mu.defined() && mu.numel() > 0; }
    int dim() const { return defined() ? static_cast<int>(mu.numel()) : 0; }
};

struct LatentPair {
    Tensor<double> z_l;
    Tensor<double> z_g;
};

// z = mu + exp(log_var / 2) * noise, differentiable through mu and log_var.
Tensor<double> reparameterize(const GaussianParams& p, const Tensor<double>& noise);

// Closed-form divergence of N(mu, sigma) from N(0, I); a [1] tensor.
// An undefined parameter pair contributes zero.
Tensor<double> kl_divergence(const GaussianParams& p);

class HmVae {
  public:
    HmVae(const Skeleton& skel, const ArchDescriptor& arch, RandomStream& rng);

    const ArchDescriptor& arch() const { return arch_; }
    const Skeleton& skeleton() const { return skel_; }

    // Channel counts and timesteps at hierarchy levels 0 (input) through 4.
    int level_nodes(int level) const;
    int level_time(int level) const;

    // x [T x J x 6] -> (local params, global params). The local pair is
    // undefined for the single-latent variants.
    std::pair<GaussianParams, GaussianParams> encode(const Tensor<double>& x) const;

    // Latents back to a window [T x J x 6]. z_l must be undefined for the
    // single-latent variants. The model must stay alive (and unmodified)
    // until backward() on any graph built through it has run.
    Tensor<double> decode(const Tensor<double>& z_l, const Tensor<double>& z_g) const;

    bool has_local_path() const { return arch_.variant == Variant::HMVAE; }

    // Canonical order; checkpoints and optimizers both follow it.
    std::vector<Tensor<double>> parameters() const;
    std::vector<Tensor<double>> local_head_parameters() const;
    std::vector<Tensor<double>> decoder_parameters() const;

    // Deep copy: same architecture, freshly allocated parameter tensors, so
    // optimizing the copy leaves this model untouched.
    HmVae clone() const;

  private:
    void build_hierarchy();
    void init_params(RandomStream& rng);
    Tensor<double> new_param(std::vector<int> shape, double bound, RandomStream& rng);

    Skeleton skel_;
    ArchDescriptor arch_;
    int times_[5];  // timesteps entering each level
    std::vector<BoneGraph> graphs_;          // levels 0..4
    std::vector<PoolingPlan> plans_;         // level i -> i+1
    std::vector<kernels::ConvTopology> topos_;  // conv support at level i

    // encoder blocks, then latent heads, then decoder entry maps, then
    // decoder blocks in execution order (deep to shallow)
    Tensor<double> enc_w_[4], enc_b_[4];
    Tensor<double> head_l_w_, head_l_b_, head_g_w_, head_g_b_;
    Tensor<double> dec_in_l_w_, dec_in_l_b_, dec_in_g_w_, dec_in_g_b_;
    Tensor<double> dec_w_[4], dec_b_[4];  // dec_w_[i] used by mirror block i+1
};

HmVae make_variant(const Skeleton& skel, ArchDescriptor arch, Variant v, RandomStream& rng);

struct LossParts {
    Tensor<double> total, rec_6d, rec_rot, rec_joints, kl_local, kl_global;
};

// L = |x'-x|^2 + |R'-R|^2 + lambda |P'-P|^2 + beta KL_l + beta KL_g, with
// rotations through the Gram-Schmidt projection and positions through
// forward kinematics at the origin.
LossParts loss_total(const HmVae& model, const Tensor<double>& x, const Tensor<double>& xp,
                     const GaussianParams& pl, const GaussianParams& pg, double beta,
                     double lambda);

struct TrainConfig {
    int batch = 8;
    int iters = 1000;
    double beta = 0.003;
    double lambda = 10.0;
    int switch_iter = 500;  // paper-scale runs use 50000
    double lr = 1e-4;
    uint64_t seed = 0;
};

struct LossRow {
    int iter;
    double total, rec_6d, rec_rot, rec_joints, kl_local, kl_global;
};

// Trains in place. Before switch_iter the local latent is pinned to the
// prior mean and neither the local KL nor the local heads receive gradient.
std::vector<LossRow> train(HmVae& model, const std::vector<MotionWindow>& data,
                           const TrainConfig& cfg);

std::string loss_log_csv(const std::vector<LossRow>& log);

void save_checkpoint(const HmVae& model, const std::string& path);
HmVae load_checkpoint(const std::string& path);

}  // namespace mp
