#include "motion_prior/tasks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include "motion_prior/optim.hpp"

namespace mp {

ConstraintMask make_keyframe_mask(int T, int lead, int trail) {
    if (T < 1 || lead < 0 || trail < 0)
        throw std::invalid_argument("make_keyframe_mask: bad arguments");
    if (lead + trail > T)
        throw std::invalid_argument("make_keyframe_mask: lead + trail exceeds " +
                                    std::to_string(T) + " frames");
    if (lead + trail == 0) throw std::invalid_argument("make_keyframe_mask: empty mask");
    ConstraintMask m;
    m.frames.assign((size_t)T, 0);
    for (int t = 0; t < lead; ++t) m.frames[t] = 1;
    for (int t = T - trail; t < T; ++t) m.frames[t] = 1;
    return m;
}

ConstraintMask make_body_part_mask(const Skeleton& skeleton, const std::string& part) {
    int J = skeleton.joint_count();
    ConstraintMask m;
    m.joints.assign((size_t)J, 1);
    if (part == "all") return m;
    if (part != "upper")
        throw std::invalid_argument("make_body_part_mask: unknown body part '" + part + "'");

    static const char* kLegMarkers[] = {"hip", "knee", "ankle", "foot", "toe", "leg"};
    auto parents = skeleton.parents();
    for (int j : skeleton.topo_order()) {
        std::string name = skeleton.joints[j].name;
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char c) { return (char)std::tolower(c); });
        bool legged = false;
        for (const char* w : kLegMarkers) legged = legged || name.find(w) != std::string::npos;
        // subtree of a dropped joint goes with it, keeping the mask
        // ancestor-closed so constrained positions only chain through
        // constrained rotations
        if (legged || (parents[j] >= 0 && !m.joints[parents[j]])) m.joints[j] = 0;
    }
    if (std::count(m.joints.begin(), m.joints.end(), 1) == 0)
        throw std::invalid_argument("make_body_part_mask: no joints left in '" + part + "'");
    return m;
}

namespace {

struct RecParts {
    Tensor<double> l6, l9, l3, total;
};

struct MaskedObjective {
    const HmVae* model;
    Tensor<double> x_t, r_t, p_t;  // constrained targets: rows, matrices, positions
    Tensor<double> m6, m9, m3;
    double lambda1 = 0;

    RecParts eval(const Tensor<double>& xp) const {
        RecParts p;
        p.l6 = sum(square(mul(sub(xp, x_t), m6)));
        auto rp = rot6d_to_matrix_op(xp);
        p.l9 = sum(square(mul(sub(rp, r_t), m9)));
        auto pp = forward_kinematics_op(rp, Tensor<double>(), model->skeleton());
        p.l3 = sum(square(mul(sub(pp, p_t), m3)));
        p.total = add(add(p.l6, p.l9), scale(p.l3, lambda1));
        return p;
    }
};

MaskedObjective build_objective(const HmVae& model, const ConstraintMask& mask,
                                double lambda1) {
    const int T = model.arch().window;
    const int J = model.skeleton().joint_count();
    std::vector<char> fm = mask.frames, jm = mask.joints;
    if (fm.empty()) fm.assign((size_t)T, 1);
    if (jm.empty()) jm.assign((size_t)J, 1);
    if ((int)fm.size() != T || (int)jm.size() != J)
        throw std::invalid_argument("optimize_latent: mask sized for a different window");
    bool anyf = std::count(fm.begin(), fm.end(), 1) > 0;
    bool anyj = std::count(jm.begin(), jm.end(), 1) > 0;
    if (!anyf || !anyj) throw std::invalid_argument("optimize_latent: empty mask");
    if ((int)mask.targets.size() != T * J * 6)
        throw std::invalid_argument("optimize_latent: targets must hold " +
                                    std::to_string(T * J * 6) + " values");

    MaskedObjective obj;
    obj.model = &model;
    obj.lambda1 = lambda1;
    std::vector<double> m6((size_t)T * J * 6), m9((size_t)T * J * 9), m3((size_t)T * J * 3);
    std::vector<double> rows((size_t)T * J * 6, 0.0), mats((size_t)T * J * 9, 0.0);
    std::vector<double> pos((size_t)T * J * 3, 0.0);
    for (int t = 0; t < T; ++t) {
        Pose pose;
        pose.rotations.assign((size_t)J, Mat3::identity());
        for (int j = 0; j < J; ++j) {
            double on = fm[t] && jm[j] ? 1.0 : 0.0;
            for (int e = 0; e < 6; ++e) m6[((size_t)t * J + j) * 6 + e] = on;
            for (int e = 0; e < 9; ++e) m9[((size_t)t * J + j) * 9 + e] = on;
            for (int e = 0; e < 3; ++e) m3[((size_t)t * J + j) * 3 + e] = on;
            // unconstrained entries keep the identity so target kinematics
            // stay evaluable; the mask zeroes their error terms
            if (!jm[j]) continue;
            Rot6 r;
            for (int e = 0; e < 6; ++e)
                r[e] = mask.targets[((size_t)t * J + j) * 6 + e];
            Mat3 R = rot6d_to_matrix(r);
            pose.rotations[j] = R;
            for (int e = 0; e < 6; ++e) rows[((size_t)t * J + j) * 6 + e] = r[e];
            for (int e = 0; e < 9; ++e) mats[((size_t)t * J + j) * 9 + e] = R.m[e];
        }
        auto p = forward_kinematics(pose, model.skeleton());
        for (int j = 0; j < J; ++j) {
            pos[((size_t)t * J + j) * 3 + 0] = p[j].x;
            pos[((size_t)t * J + j) * 3 + 1] = p[j].y;
            pos[((size_t)t * J + j) * 3 + 2] = p[j].z;
        }
    }
    obj.x_t = Tensor<double>::from_data({T, J, 6}, std::move(rows));
    obj.r_t = Tensor<double>::from_data({T, J, 9}, std::move(mats));
    obj.p_t = Tensor<double>::from_data({T, J, 3}, std::move(pos));
    obj.m6 = Tensor<double>::from_data({T, J, 6}, std::move(m6));
    obj.m9 = Tensor<double>::from_data({T, J, 9}, std::move(m9));
    obj.m3 = Tensor<double>::from_data({T, J, 3}, std::move(m3));
    return obj;
}

// Adam or plain gradient descent behind one face.
struct Descent {
    std::unique_ptr<Adam> adam;
    std::unique_ptr<Sgd> sgd;

    Descent(std::vector<Tensor<double>> params, double lr, bool plain) {
        if (plain)
            sgd = std::make_unique<Sgd>(std::move(params), lr);
        else
            adam = std::make_unique<Adam>(std::move(params), lr);
    }
    void zero_grad() { adam ? adam->zero_grad() : sgd->zero_grad(); }
    void step() { adam ? adam->step() : sgd->step(); }
};

Tensor<double> normal_draw(RandomStream& rng, int n) {
    std::vector<double> v((size_t)n);
    for (auto& x : v) x = rng.normal();
    auto t = Tensor<double>::from_data({n}, std::move(v));
    t.set_requires_grad(true);
    return t;
}

OptimRow make_row(int it, int phase, const RecParts& p, double reg) {
    OptimRow r;
    r.iter = it;
    r.phase = phase;
    r.rec_6d = p.l6.item();
    r.rec_rot = p.l9.item();
    r.rec_joints = p.l3.item();
    r.reg = reg;
    r.total = p.total.item() + reg;
    if (!std::isfinite(r.total))
        throw std::runtime_error("optimize_latent: non-finite loss at phase " +
                                 std::to_string(phase) + " iteration " + std::to_string(it));
    return r;
}

}  // namespace

OptimResult optimize_latent(const HmVae& model, const ConstraintMask& mask,
                            const OptimConfig& cfg) {
    if (cfg.phase1_iters < 0 || cfg.phase2_iters < 0 || cfg.lambda1 < 0 || cfg.lambda2 < 0 ||
        cfg.restarts < 1)
        throw std::invalid_argument("optimize_latent: bad config");
    auto obj = build_objective(model, mask, cfg.lambda1);

    RandomStream rng(cfg.seed);
    const bool local = model.has_local_path();

    // phase 1: descend on the latents, decoder untouched; each restart is an
    // independent draw and the best final loss wins
    std::vector<OptimRow> best_trace;
    Tensor<double> best_l, best_g;
    double best = 0;
    for (int r = 0; r < cfg.restarts; ++r) {
        Tensor<double> z_l, z_g;
        if (local) z_l = normal_draw(rng, model.arch().dh_local);
        z_g = normal_draw(rng, model.arch().dh_global);
        std::vector<Tensor<double>> zs;
        if (local) zs.push_back(z_l);
        zs.push_back(z_g);
        Descent opt(zs, cfg.lr1, cfg.plain_sgd);

        std::vector<OptimRow> trace;
        for (int it = 0; it < cfg.phase1_iters; ++it) {
            auto parts = obj.eval(model.decode(z_l, z_g));
            trace.push_back(make_row(it, 1, parts, 0.0));
            opt.zero_grad();
            parts.total.backward();
            opt.step();
        }
        {
            // closing evaluation, so the trace ends on the state that is kept
            NoGrad guard;
            auto parts = obj.eval(model.decode(z_l, z_g));
            trace.push_back(make_row(cfg.phase1_iters, 1, parts, 0.0));
        }
        if (r == 0 || trace.back().total < best) {
            best = trace.back().total;
            best_trace = std::move(trace);
            best_l = z_l;
            best_g = z_g;
        }
    }

    // phase 2: freeze the winning latents, descend on a private decoder copy
    // tethered to the pretrained weights
    Tensor<double> z_l, z_g;
    if (local) z_l = Tensor<double>::from_data(best_l.shape(), best_l.values());
    z_g = Tensor<double>::from_data(best_g.shape(), best_g.values());

    HmVae tuned = model.clone();
    auto dec = tuned.decoder_parameters();
    std::vector<Tensor<double>> anchors;
    for (const auto& p : dec) anchors.push_back(Tensor<double>::from_data(p.shape(), p.values()));
    Descent opt(dec, cfg.lr2, cfg.plain_sgd);

    auto drift = [&]() {
        Tensor<double> s;
        for (size_t i = 0; i < dec.size(); ++i) {
            auto d = sum(square(sub(dec[i], anchors[i])));
            s = i == 0 ? d : add(s, d);
        }
        return s;
    };

    for (int it = 0; it < cfg.phase2_iters; ++it) {
        auto parts = obj.eval(tuned.decode(z_l, z_g));
        auto reg = scale(drift(), cfg.lambda2);
        best_trace.push_back(make_row(it, 2, parts, reg.item()));
        auto total = add(parts.total, reg);
        opt.zero_grad();
        total.backward();
        opt.step();
    }

    OptimResult out;
    {
        NoGrad guard;
        auto xp = tuned.decode(z_l, z_g);
        auto parts = obj.eval(xp);
        best_trace.push_back(make_row(cfg.phase2_iters, 2, parts, drift().item() * cfg.lambda2));
        out.window.T = model.arch().window;
        out.window.J = model.skeleton().joint_count();
        out.window.rot6 = xp.values();
        out.window.root_pos.assign((size_t)out.window.T * 3, 0.0);
    }
    out.trace = std::move(best_trace);
    return out;
}

std::string optim_trace_jsonl(const std::vector<OptimRow>& trace) {
    std::string out;
    char buf[320];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof(buf),
                      "{\"iter\":%d,\"phase\":%d,\"rec_6d\":%.9g,\"rec_rot\":%.9g,"
                      "\"rec_joints\":%.9g,\"reg\":%.9g,\"total\":%.9g}\n",
                      r.iter, r.phase, r.rec_6d, r.rec_rot, r.rec_joints, r.reg, r.total);
        out += buf;
    }
    return out;
}

MotionClip refine_sequence(const HmVae& model, const MotionClip& noisy) {
    const int T = model.arch().window;
    const int J = model.skeleton().joint_count();
    const int L = noisy.frame_count();
    if (noisy.skeleton.joint_count() != J)
        throw std::invalid_argument("refine_sequence: skeleton does not match the model");
    if (L < T)
        throw std::invalid_argument("refine_sequence: " + std::to_string(L) +
                                    " frames is shorter than the model window " +
                                    std::to_string(T));

    auto wins = window(noisy, T, 1);
    const int half = T / 2;
    MotionWindow out;
    out.T = L;
    out.J = J;
    out.rot6.resize((size_t)L * J * 6);
    out.root_pos.resize((size_t)L * 3);
    for (int t = 0; t < L; ++t) {
        out.root_pos[3 * t + 0] = noisy.frames[t].root_translation.x;
        out.root_pos[3 * t + 1] = noisy.frames[t].root_translation.y;
        out.root_pos[3 * t + 2] = noisy.frames[t].root_translation.z;
    }

    NoGrad guard;
    const size_t row = (size_t)J * 6;
    for (int p = 0; p <= L - T; ++p) {
        auto x = Tensor<double>::from_data({T, J, 6}, wins[p].rot6);
        auto [pl, pg] = model.encode(x);
        auto xp = model.decode(model.has_local_path() ? pl.mu : Tensor<double>(), pg.mu);
        const double* v = xp.data();
        auto take = [&](int src, int dst) {
            std::copy(v + src * row, v + (src + 1) * row, out.rot6.begin() + dst * row);
        };
        if (p == 0)
            for (int f = 0; f < half; ++f) take(f, f);
        take(half, p + half);
        if (p == L - T)
            for (int f = half + 1; f < T; ++f) take(f, p + f);
    }
    return window_to_clip(out, noisy.skeleton, noisy.fps);
}

MotionWindow keyframe_baseline(const MotionWindow& w, int lead, int trail,
                               const std::string& method) {
    if (method != "slerp" && method != "lerp")
        throw std::invalid_argument("keyframe_baseline: unknown method '" + method + "'");
    if (lead < 1 || trail < 1 || lead + trail > w.T)
        throw std::invalid_argument("keyframe_baseline: need a key frame on both sides");
    MotionWindow out = w;
    const int i0 = lead - 1, i1 = w.T - trail;
    const size_t row = (size_t)w.J * 6;
    for (int f = lead; f < i1; ++f) {
        double u = (double)(f - i0) / (double)(i1 - i0);
        for (int j = 0; j < w.J; ++j) {
            const double* a = &w.rot6[i0 * row + (size_t)j * 6];
            const double* b = &w.rot6[i1 * row + (size_t)j * 6];
            double* dst = &out.rot6[f * row + (size_t)j * 6];
            if (method == "lerp") {
                for (int e = 0; e < 6; ++e) dst[e] = (1.0 - u) * a[e] + u * b[e];
            } else {
                Rot6 ra, rb;
                std::copy(a, a + 6, ra.begin());
                std::copy(b, b + 6, rb.begin());
                Quat q = slerp(matrix_to_quat(rot6d_to_matrix(ra)),
                               matrix_to_quat(rot6d_to_matrix(rb)), u);
                Rot6 rc = matrix_to_rot6d(quat_to_matrix(q));
                std::copy(rc.begin(), rc.end(), dst);
            }
        }
        for (int e = 0; e < 3; ++e)
            out.root_pos[3 * f + e] =
                (1.0 - u) * w.root_pos[3 * i0 + e] + u * w.root_pos[3 * i1 + e];
    }
    return out;
}

}  // namespace mp
