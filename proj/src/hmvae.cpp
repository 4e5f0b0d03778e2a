#include "motion_prior/hmvae.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "motion_prior/kinematics.hpp"
#include "motion_prior/optim.hpp"

namespace mp {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::HMVAE: return "hm-vae";
        case Variant::MVAE: return "m-vae";
        case Variant::TCNVAE: return "tcn-vae";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    std::string n;
    for (char c : name) n += (char)std::tolower((unsigned char)c);
    if (n == "hm-vae" || n == "hmvae") return Variant::HMVAE;
    if (n == "m-vae" || n == "mvae") return Variant::MVAE;
    if (n == "tcn-vae" || n == "tcnvae") return Variant::TCNVAE;
    throw std::invalid_argument("unknown variant '" + name + "'");
}

ArchDescriptor ArchDescriptor::toy(int window) {
    ArchDescriptor a;
    a.window = window;
    a.channels = {8, 12, 12, 16};
    a.dh_local = 16;
    a.dh_global = 16;
    return a;
}

ArchDescriptor ArchDescriptor::refinement(int window) {
    ArchDescriptor a = toy(window);
    a.strides = {2, 2, 2, 1};
    return a;
}

// ---- latent plumbing ----

Tensor<double> reparameterize(const GaussianParams& p, const Tensor<double>& noise) {
    if (!p.defined()) throw std::invalid_argument("reparameterize: undefined parameters");
    if (!noise.defined() || noise.numel() != p.mu.numel())
        throw std::invalid_argument("reparameterize: noise dimension mismatch");
    return add(p.mu, mul(exp(scale(p.log_var, 0.5)), noise));
}

Tensor<double> kl_divergence(const GaussianParams& p) {
    if (!p.defined()) return Tensor<double>::zeros({1});
    auto t = add(square(p.mu), exp(p.log_var));
    t = sub(t, p.log_var);
    t = add_scalar(t, -1.0);
    return scale(sum(t), 0.5);
}

// ---- model ----

HmVae::HmVae(const Skeleton& skel, const ArchDescriptor& arch, RandomStream& rng)
    : skel_(skel), arch_(arch) {
    skel_.validate();
    for (int c : arch_.channels)
        if (c < 1) throw std::invalid_argument("descriptor: channel width must be positive");
    if (arch_.k < 1 || arch_.d < 0 || arch_.dh_local < 1 || arch_.dh_global < 1 ||
        arch_.window < 1)
        throw std::invalid_argument("descriptor: sizes must be positive");

    times_[0] = arch_.window;
    for (int i = 0; i < 4; ++i) {
        int s = arch_.strides[i];
        if (s < 1) throw std::invalid_argument("descriptor: stride must be positive");
        times_[i + 1] = kernels::conv1d_out_len(times_[i], arch_.k, s, kernels::Padding::kSame);
        if (times_[i + 1] * s != times_[i])
            throw std::invalid_argument("descriptor: window " + std::to_string(arch_.window) +
                                        " is not divisible by the stride plan");
    }

    if (arch_.variant != Variant::TCNVAE) build_hierarchy();
    init_params(rng);
}

void HmVae::build_hierarchy() {
    graphs_.push_back(BoneGraph::channels_of(skel_));
    for (int i = 0; i < 4; ++i) {
        plans_.push_back(build_pooling_plan(graphs_[i]));
        graphs_.push_back(plans_[i].merged);
    }
    for (int i = 0; i < 4; ++i)
        topos_.push_back(conv_topology(neighbors_within(graphs_[i], arch_.d)));
}

int HmVae::level_nodes(int level) const {
    if (level < 0 || level > 4) throw std::invalid_argument("level_nodes: level out of range");
    if (arch_.variant == Variant::TCNVAE)
        return level == 0 ? skel_.joint_count() : 1;
    return graphs_[level].count;
}

int HmVae::level_time(int level) const {
    if (level < 0 || level > 4) throw std::invalid_argument("level_time: level out of range");
    return times_[level];
}

Tensor<double> HmVae::new_param(std::vector<int> shape, double bound, RandomStream& rng) {
    std::vector<double> v((size_t)product(shape));
    for (auto& x : v) x = bound > 0 ? rng.uniform(-bound, bound) : 0.0;
    auto t = Tensor<double>::from_data(std::move(shape), std::move(v));
    t.set_requires_grad(true);
    return t;
}

// Weights and biases both draw from the uniform fan-in rule. A zero bias
// init would make every decoder activation scale with the latent magnitude,
// and an untrained decode of near-zero posterior means then lands in the
// degenerate zone of the 6D decode; the bias floor keeps it well away.
void HmVae::init_params(RandomStream& rng) {
    const int J = skel_.joint_count();
    const int k = arch_.k;
    const bool tcn = arch_.variant == Variant::TCNVAE;
    const bool local = arch_.variant == Variant::HMVAE;
    const auto& c = arch_.channels;

    for (int i = 0; i < 4; ++i) {
        int cin = i == 0 ? (tcn ? J * 6 : 6) : c[i - 1];
        double bound = std::sqrt(1.0 / (k * cin));
        if (tcn) {
            enc_w_[i] = new_param({k, cin, c[i]}, bound, rng);
            enc_b_[i] = new_param({c[i]}, bound, rng);
        } else {
            int P = topos_[i].pairs();
            enc_w_[i] = new_param({P, k, cin, c[i]}, bound, rng);
            enc_b_[i] = new_param({P, c[i]}, bound, rng);
        }
    }

    int flat1 = times_[1] * level_nodes(1) * c[0];
    int flat4 = times_[4] * (tcn ? 1 : level_nodes(4)) * c[3];
    if (local) {
        head_l_w_ = new_param({flat1, 2 * arch_.dh_local}, std::sqrt(1.0 / flat1), rng);
        head_l_b_ = new_param({2 * arch_.dh_local}, std::sqrt(1.0 / flat1), rng);
    }
    head_g_w_ = new_param({flat4, 2 * arch_.dh_global}, std::sqrt(1.0 / flat4), rng);
    head_g_b_ = new_param({2 * arch_.dh_global}, std::sqrt(1.0 / flat4), rng);
    if (local) {
        dec_in_l_w_ = new_param({arch_.dh_local, flat1}, std::sqrt(1.0 / arch_.dh_local), rng);
        dec_in_l_b_ = new_param({flat1}, std::sqrt(1.0 / arch_.dh_local), rng);
    }
    dec_in_g_w_ = new_param({arch_.dh_global, flat4}, std::sqrt(1.0 / arch_.dh_global), rng);
    dec_in_g_b_ = new_param({flat4}, std::sqrt(1.0 / arch_.dh_global), rng);

    // decoder blocks deep to shallow; dec_w_[i] belongs to the mirror of B_{i+1}
    for (int i = 3; i >= 0; --i) {
        int cin = i == 0 ? (local ? 2 * c[0] : c[0]) : c[i];
        int cout = i == 0 ? (tcn ? J * 6 : 6) : c[i - 1];
        double bound = std::sqrt(1.0 / (k * cin));
        if (tcn) {
            dec_w_[i] = new_param({k, cin, cout}, bound, rng);
            dec_b_[i] = new_param({cout}, bound, rng);
        } else {
            int P = topos_[i].pairs();
            dec_w_[i] = new_param({P, k, cin, cout}, bound, rng);
            dec_b_[i] = new_param({P, cout}, bound, rng);
        }
    }
}

std::vector<Tensor<double>> HmVae::parameters() const {
    std::vector<Tensor<double>> out;
    for (int i = 0; i < 4; ++i) {
        out.push_back(enc_w_[i]);
        out.push_back(enc_b_[i]);
    }
    if (head_l_w_.defined()) {
        out.push_back(head_l_w_);
        out.push_back(head_l_b_);
    }
    out.push_back(head_g_w_);
    out.push_back(head_g_b_);
    if (dec_in_l_w_.defined()) {
        out.push_back(dec_in_l_w_);
        out.push_back(dec_in_l_b_);
    }
    out.push_back(dec_in_g_w_);
    out.push_back(dec_in_g_b_);
    for (int i = 3; i >= 0; --i) {
        out.push_back(dec_w_[i]);
        out.push_back(dec_b_[i]);
    }
    return out;
}

std::vector<Tensor<double>> HmVae::local_head_parameters() const {
    if (!head_l_w_.defined()) return {};
    return {head_l_w_, head_l_b_};
}

std::vector<Tensor<double>> HmVae::decoder_parameters() const {
    std::vector<Tensor<double>> out;
    if (dec_in_l_w_.defined()) {
        out.push_back(dec_in_l_w_);
        out.push_back(dec_in_l_b_);
    }
    out.push_back(dec_in_g_w_);
    out.push_back(dec_in_g_b_);
    for (int i = 3; i >= 0; --i) {
        out.push_back(dec_w_[i]);
        out.push_back(dec_b_[i]);
    }
    return out;
}

namespace {
Tensor<double> fresh_copy(const Tensor<double>& t) {
    if (!t.defined()) return t;
    auto c = Tensor<double>::from_data(t.shape(), t.values());
    c.set_requires_grad(true);
    return c;
}
}  // namespace

HmVae HmVae::clone() const {
    HmVae c(*this);
    for (int i = 0; i < 4; ++i) {
        c.enc_w_[i] = fresh_copy(enc_w_[i]);
        c.enc_b_[i] = fresh_copy(enc_b_[i]);
        c.dec_w_[i] = fresh_copy(dec_w_[i]);
        c.dec_b_[i] = fresh_copy(dec_b_[i]);
    }
    c.head_l_w_ = fresh_copy(head_l_w_);
    c.head_l_b_ = fresh_copy(head_l_b_);
    c.head_g_w_ = fresh_copy(head_g_w_);
    c.head_g_b_ = fresh_copy(head_g_b_);
    c.dec_in_l_w_ = fresh_copy(dec_in_l_w_);
    c.dec_in_l_b_ = fresh_copy(dec_in_l_b_);
    c.dec_in_g_w_ = fresh_copy(dec_in_g_w_);
    c.dec_in_g_b_ = fresh_copy(dec_in_g_b_);
    return c;
}

std::pair<GaussianParams, GaussianParams> HmVae::encode(const Tensor<double>& x) const {
    const int J = skel_.joint_count();
    if (x.shape() != std::vector<int>{arch_.window, J, 6})
        throw std::invalid_argument("encode: input " + shape_string(x.shape()) + " but window is [" +
                                    std::to_string(arch_.window) + " x " + std::to_string(J) +
                                    " x 6]");
    const double slope = arch_.leaky_slope;
    auto split = [](const Tensor<double>& raw, int dh) {
        GaussianParams p;
        p.mu = slice_last(raw, 0, dh);
        p.log_var = slice_last(raw, dh, 2 * dh);
        return p;
    };

    if (arch_.variant == Variant::TCNVAE) {
        auto h = reshape(x, {arch_.window, J * 6});
        for (int i = 0; i < 4; ++i)
            h = leaky_relu(conv1d(h, enc_w_[i], enc_b_[i], arch_.strides[i],
                                  kernels::Padding::kSame),
                           slope);
        auto raw = linear(reshape(h, {(int)h.numel()}), head_g_w_, head_g_b_);
        return {GaussianParams{}, split(raw, arch_.dh_global)};
    }

    Tensor<double> h = x, f_local;
    for (int i = 0; i < 4; ++i) {
        h = skeleton_conv(h, enc_w_[i], enc_b_[i], topos_[i], arch_.strides[i],
                          kernels::Padding::kSame);
        h = leaky_relu(h, slope);
        h = skeleton_pool(h, plans_[i]);
        if (i == 0) f_local = h;
    }

    GaussianParams pl;
    if (arch_.variant == Variant::HMVAE) {
        auto raw_l = linear(reshape(f_local, {(int)f_local.numel()}), head_l_w_, head_l_b_);
        pl = split(raw_l, arch_.dh_local);
    }
    auto raw_g = linear(reshape(h, {(int)h.numel()}), head_g_w_, head_g_b_);
    return {pl, split(raw_g, arch_.dh_global)};
}

Tensor<double> HmVae::decode(const Tensor<double>& z_l, const Tensor<double>& z_g) const {
    const int J = skel_.joint_count();
    const double slope = arch_.leaky_slope;
    const bool local = arch_.variant == Variant::HMVAE;
    if (!z_g.defined() || z_g.numel() != arch_.dh_global)
        throw std::invalid_argument("decode: global latent dimension mismatch");
    if (local) {
        if (!z_l.defined() || z_l.numel() != arch_.dh_local)
            throw std::invalid_argument("decode: local latent dimension mismatch");
    } else if (z_l.defined() && z_l.numel() > 0) {
        throw std::invalid_argument("decode: this variant takes no local latent");
    }

    if (arch_.variant == Variant::TCNVAE) {
        auto h = reshape(linear(z_g, dec_in_g_w_, dec_in_g_b_),
                         {times_[4], arch_.channels[3]});
        for (int i = 3; i >= 1; --i) {
            h = upsample_nearest(h, arch_.strides[i]);
            h = leaky_relu(conv1d(h, dec_w_[i], dec_b_[i], 1, kernels::Padding::kSame), slope);
        }
        h = upsample_nearest(h, arch_.strides[0]);
        h = conv1d(h, dec_w_[0], dec_b_[0], 1, kernels::Padding::kSame);
        return reshape(h, {arch_.window, J, 6});
    }

    auto h = reshape(linear(z_g, dec_in_g_w_, dec_in_g_b_),
                     {times_[4], graphs_[4].count, arch_.channels[3]});
    for (int i = 3; i >= 1; --i) {
        h = upsample_nearest(h, arch_.strides[i]);
        h = skeleton_unpool(h, plans_[i]);
        h = skeleton_conv(h, dec_w_[i], dec_b_[i], topos_[i], 1, kernels::Padding::kSame);
        h = leaky_relu(h, slope);
    }
    if (local) {
        auto f = reshape(linear(z_l, dec_in_l_w_, dec_in_l_b_),
                         {times_[1], graphs_[1].count, arch_.channels[0]});
        h = concat_last(h, f);
    }
    h = upsample_nearest(h, arch_.strides[0]);
    h = skeleton_unpool(h, plans_[0]);
    return skeleton_conv(h, dec_w_[0], dec_b_[0], topos_[0], 1, kernels::Padding::kSame);
}

HmVae make_variant(const Skeleton& skel, ArchDescriptor arch, Variant v, RandomStream& rng) {
    arch.variant = v;
    return HmVae(skel, arch, rng);
}

// ---- loss ----

LossParts loss_total(const HmVae& model, const Tensor<double>& x, const Tensor<double>& xp,
                     const GaussianParams& pl, const GaussianParams& pg, double beta,
                     double lambda) {
    if (x.shape() != xp.shape())
        throw std::invalid_argument("loss_total: reconstruction " + shape_string(xp.shape()) +
                                    " against input " + shape_string(x.shape()));
    LossParts parts;
    parts.rec_6d = sum(square(sub(xp, x)));
    auto rp = rot6d_to_matrix_op(xp);
    auto rt = rot6d_to_matrix_op(x);
    parts.rec_rot = sum(square(sub(rp, rt)));
    auto pp = forward_kinematics_op(rp, model.skeleton());
    auto pt = forward_kinematics_op(rt, model.skeleton());
    parts.rec_joints = sum(square(sub(pp, pt)));
    parts.kl_local = kl_divergence(pl);
    parts.kl_global = kl_divergence(pg);
    parts.total = add(add(parts.rec_6d, parts.rec_rot),
                      add(scale(parts.rec_joints, lambda),
                          add(scale(parts.kl_local, beta), scale(parts.kl_global, beta))));
    return parts;
}

// ---- training ----

std::vector<LossRow> train(HmVae& model, const std::vector<MotionWindow>& data,
                           const TrainConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    if (cfg.batch < 1 || cfg.iters < 0) throw std::invalid_argument("train: bad config");
    const int T = model.arch().window;
    const int J = model.skeleton().joint_count();

    std::vector<Tensor<double>> xs;
    xs.reserve(data.size());
    for (const auto& w : data) {
        if (w.T != T || w.J != J || (int)w.rot6.size() != T * J * 6)
            throw std::invalid_argument("train: window does not match the descriptor");
        xs.push_back(Tensor<double>::from_data({T, J, 6}, w.rot6));
    }

    Adam opt(model.parameters(), cfg.lr);
    RandomStream rng(cfg.seed);
    std::vector<LossRow> log;
    log.reserve(cfg.iters);

    for (int it = 0; it < cfg.iters; ++it) {
        const bool use_local = model.has_local_path() && it >= cfg.switch_iter;
        Tensor<double> batch_total;
        LossRow row{it, 0, 0, 0, 0, 0, 0};

        for (int b = 0; b < cfg.batch; ++b) {
            const auto& x = xs[rng.index(xs.size())];
            auto [pl, pg] = model.encode(x);

            std::vector<double> ng((size_t)model.arch().dh_global);
            for (auto& v : ng) v = rng.normal();
            auto z_g = reparameterize(pg, Tensor<double>::from_data({(int)ng.size()}, ng));

            Tensor<double> z_l;
            if (model.has_local_path()) {
                if (use_local) {
                    std::vector<double> nl((size_t)model.arch().dh_local);
                    for (auto& v : nl) v = rng.normal();
                    z_l = reparameterize(pl, Tensor<double>::from_data({(int)nl.size()}, nl));
                } else {
                    z_l = Tensor<double>::zeros({model.arch().dh_local});
                }
            }

            auto xp = model.decode(z_l, z_g);
            auto parts = loss_total(model, x, xp, use_local ? pl : GaussianParams{}, pg,
                                    cfg.beta, cfg.lambda);
            batch_total = b == 0 ? parts.total : add(batch_total, parts.total);
            row.total += parts.total.item();
            row.rec_6d += parts.rec_6d.item();
            row.rec_rot += parts.rec_rot.item();
            row.rec_joints += parts.rec_joints.item();
            row.kl_local += parts.kl_local.item();
            row.kl_global += parts.kl_global.item();
        }

        row.total /= cfg.batch;
        row.rec_6d /= cfg.batch;
        row.rec_rot /= cfg.batch;
        row.rec_joints /= cfg.batch;
        row.kl_local /= cfg.batch;
        row.kl_global /= cfg.batch;
        if (!std::isfinite(row.total))
            throw std::runtime_error(
                "train: non-finite loss at iteration " + std::to_string(it) + " (rec_6d=" +
                std::to_string(row.rec_6d) + ", rec_rot=" + std::to_string(row.rec_rot) +
                ", rec_joints=" + std::to_string(row.rec_joints) + ", kl_local=" +
                std::to_string(row.kl_local) + ", kl_global=" + std::to_string(row.kl_global) +
                ")");

        opt.zero_grad();
        scale(batch_total, 1.0 / cfg.batch).backward();
        opt.step();
        log.push_back(row);
    }
    return log;
}

std::string loss_log_csv(const std::vector<LossRow>& log) {
    std::string out = "iter,total,rec_6d,rec_rot,rec_joints,kl_local,kl_global\n";
    char buf[256];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.iter, r.total,
                      r.rec_6d, r.rec_rot, r.rec_joints, r.kl_local, r.kl_global);
        out += buf;
    }
    return out;
}

// ---- checkpoints: "HMVAE1", descriptor, skeleton, then f32 parameters ----

namespace {

void put_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s += (char)((v >> (8 * i)) & 0xff);
}

void put_i32(std::string& s, int32_t v) { put_u32(s, (uint32_t)v); }

void put_f64(std::string& s, double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    for (int i = 0; i < 8; ++i) s += (char)((u >> (8 * i)) & 0xff);
}

void put_f32(std::string& s, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(s, u);
}

struct ByteReader {
    const std::string& s;
    size_t pos = 0;
    void need(size_t n) {
        if (pos + n > s.size()) throw std::runtime_error("checkpoint: truncated file");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= (uint32_t)(unsigned char)s[pos++] << (8 * i);
        return v;
    }
    int32_t i32() { return (int32_t)u32(); }
    double f64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= (uint64_t)(unsigned char)s[pos++] << (8 * i);
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }
    float f32() {
        uint32_t v = u32();
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string out = s.substr(pos, n);
        pos += n;
        return out;
    }
};

}  // namespace

void save_checkpoint(const HmVae& model, const std::string& path) {
    const auto& a = model.arch();
    std::string out = "HMVAE1";
    out += (char)(unsigned char)a.variant;
    put_i32(out, a.window);
    put_i32(out, a.d);
    put_i32(out, a.k);
    put_i32(out, a.dh_local);
    put_i32(out, a.dh_global);
    for (int s : a.strides) put_i32(out, s);
    for (int c : a.channels) put_i32(out, c);
    put_f64(out, a.leaky_slope);

    const auto& sk = model.skeleton();
    put_i32(out, sk.joint_count());
    for (const auto& j : sk.joints) {
        put_u32(out, (uint32_t)j.name.size());
        out += j.name;
        put_i32(out, j.parent);
        put_f64(out, j.offset.x);
        put_f64(out, j.offset.y);
        put_f64(out, j.offset.z);
    }

    auto params = model.parameters();
    put_u32(out, (uint32_t)params.size());
    for (const auto& p : params) {
        put_u32(out, (uint32_t)p.numel());
        for (int64_t i = 0; i < p.numel(); ++i) put_f32(out, (float)p.data()[i]);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f.good()) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    f.write(out.data(), (std::streamsize)out.size());
    if (!f.good()) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

HmVae load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f.good()) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    std::string blob((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    ByteReader r{blob};

    if (r.bytes(6) != "HMVAE1") throw std::runtime_error("checkpoint: bad magic");
    unsigned char kind = (unsigned char)r.bytes(1)[0];
    if (kind > 2) throw std::runtime_error("checkpoint: unknown variant byte");

    ArchDescriptor a;
    a.variant = (Variant)kind;
    a.window = r.i32();
    a.d = r.i32();
    a.k = r.i32();
    a.dh_local = r.i32();
    a.dh_global = r.i32();
    for (auto& s : a.strides) s = r.i32();
    for (auto& c : a.channels) c = r.i32();
    a.leaky_slope = r.f64();

    Skeleton sk;
    int J = r.i32();
    if (J < 1 || J > 1000000) throw std::runtime_error("checkpoint: implausible joint count");
    for (int j = 0; j < J; ++j) {
        Joint joint;
        joint.name = r.bytes(r.u32());
        joint.parent = r.i32();
        joint.offset.x = r.f64();
        joint.offset.y = r.f64();
        joint.offset.z = r.f64();
        sk.joints.push_back(std::move(joint));
    }

    RandomStream dummy(0);
    HmVae model(sk, a, dummy);
    auto params = model.parameters();
    uint32_t n = r.u32();
    if (n != params.size()) throw std::runtime_error("checkpoint: parameter count mismatch");
    for (auto& p : params) {
        uint32_t numel = r.u32();
        if ((int64_t)numel != p.numel())
            throw std::runtime_error("checkpoint: parameter size mismatch");
        double* dst = p.mutable_data();
        for (uint32_t i = 0; i < numel; ++i) dst[i] = (double)r.f32();
    }
    if (r.pos != blob.size()) throw std::runtime_error("checkpoint: trailing bytes");
    return model;
}

}  // namespace mp
