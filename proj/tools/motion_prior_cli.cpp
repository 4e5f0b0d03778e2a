// Command-line front end: training, the three applications, metric
// evaluation, synthetic data, and the gradient self-check. Every run writes
// a manifest with the fully resolved configuration; fixed seeds give
// byte-identical outputs.

#include <omp.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "motion_prior/diagnostics.hpp"
#include "motion_prior/metrics.hpp"
#include "motion_prior/tasks.hpp"
#include "motion_prior/trajectory.hpp"

namespace fs = std::filesystem;
using namespace mp;

namespace {

// ---- flat key = value config files; flags override file values ----

std::map<std::string, std::string> load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    std::map<std::string, std::string> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return out;
}

struct Settings {
    std::map<std::string, std::string> file;

    template <class T>
    T get(const std::string& key, T fallback) const {
        auto it = file.find(key);
        if (it == file.end()) return fallback;
        std::istringstream in(it->second);
        T v;
        if (!(in >> v)) throw std::runtime_error("config key '" + key + "': bad value");
        return v;
    }
    std::string get(const std::string& key, const char* fallback) const {
        auto it = file.find(key);
        return it == file.end() ? fallback : it->second;
    }
};

uint64_t env_seed() {
    const char* s = std::getenv("MOTION_PRIOR_SEED");
    return s ? std::strtoull(s, nullptr, 10) : 0;
}

// ---- manifest + output plumbing ----

struct Manifest {
    std::vector<std::pair<std::string, std::string>> rows;

    void put(const std::string& k, const std::string& v) { rows.push_back({k, v}); }
    void put(const std::string& k, int64_t v) { put(k, std::to_string(v)); }
    void put(const std::string& k, uint64_t v) { put(k, std::to_string(v)); }
    void put(const std::string& k, int v) { put(k, std::to_string(v)); }
    void put(const std::string& k, double v) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        put(k, std::string(buf));
    }
};

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
}

void write_manifest(const fs::path& dir, const std::string& command, Manifest m) {
    std::string text = "command = " + command + "\n";
    std::sort(m.rows.begin(), m.rows.end());
    for (const auto& [k, v] : m.rows) text += k + " = " + v + "\n";
    write_file(dir / "manifest.txt", text);
}

fs::path ensure_out_dir(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

// ---- motion file loading ----

MotionClip load_motion(const std::string& path, const std::string& preset, double unit_scale,
                       double fps) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open motion file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
        return parse_motion_csv(buf.str(), skeleton_preset(preset), fps);
    return parse_bvh(buf.str(), unit_scale);
}

MotionClip synth_clip(const std::string& preset, int length, uint64_t seed) {
    SynthConfig sc;
    sc.preset = preset;
    sc.seed = seed;
    sc.length = length;
    return synth_dataset(sc, 1)[0];
}

PositionSeq positions_at_origin(const MotionClip& clip) {
    PositionSeq out;
    for (const auto& f : clip.frames) {
        Pose p = f;
        p.root_translation = {0, 0, 0};
        out.push_back(forward_kinematics(p, clip.skeleton));
    }
    return out;
}

std::string report_pair_json(const MetricReport& optimized, const MetricReport& baseline) {
    return "{\n  \"optimized\": " + to_json(optimized) + ",\n  \"baseline\": " +
           to_json(baseline) + "\n}\n";
}

// ---- subcommand payloads ----

struct TrainArgs {
    std::string model = "hmvae", preset = "toy-7", out = ".";
    int window = 16, clips = 16, length = 16, iters = 1000, batch = 8, switch_iter = 500;
    double beta = 0.003, lambda = 10.0, lr = 1e-3;
    uint64_t seed = 0, data_seed = 1;
};

int cmd_train(const TrainArgs& a) {
    auto dir = ensure_out_dir(a.out);
    Manifest m;
    m.put("model", a.model);
    m.put("preset", a.preset);
    m.put("window", a.window);
    m.put("clips", a.clips);
    m.put("length", a.length);
    m.put("iters", a.iters);
    m.put("batch", a.batch);
    m.put("seed", a.seed);
    m.put("data_seed", a.data_seed);

    SynthConfig sc;
    sc.preset = a.preset;
    sc.seed = a.data_seed;
    sc.length = a.length;
    auto clips = synth_dataset(sc, a.clips);

    if (a.model == "trajectory") {
        std::vector<MotionWindow> data;
        for (const auto& c : clips) data.push_back(clip_to_window(c));
        RandomStream rng(a.seed);
        TrajectoryNet net(skeleton_preset(a.preset), TrajectoryDescriptor{}, rng);
        TrajectoryTrainConfig cfg;
        cfg.iters = a.iters;
        cfg.batch = a.batch;
        cfg.lr = a.lr;
        cfg.seed = a.seed;
        m.put("lr", cfg.lr);
        auto log = train_trajectory(net, data, cfg);
        write_file(dir / "loss_log.csv", trajectory_log_csv(log));
        auto t = predict_trajectory(net, local_positions(data[0], net.skeleton()));
        write_file(dir / "trajectory.csv", trajectory_csv(t));
        write_manifest(dir, "train", std::move(m));
        std::printf("trained trajectory model, final loss %.6g\n", log.back().total);
        return 0;
    }

    ArchDescriptor arch = ArchDescriptor::toy(a.window);
    arch.variant = variant_from_name(a.model);
    std::vector<MotionWindow> data;
    for (const auto& c : clips)
        for (const auto& w : window(c, a.window, a.window)) data.push_back(w);

    RandomStream rng(a.seed);
    HmVae model(skeleton_preset(a.preset), arch, rng);
    TrainConfig cfg;
    cfg.iters = a.iters;
    cfg.batch = a.batch;
    cfg.beta = a.beta;
    cfg.lambda = a.lambda;
    cfg.switch_iter = a.switch_iter;
    cfg.lr = a.lr;
    cfg.seed = a.seed;
    m.put("beta", cfg.beta);
    m.put("lambda", cfg.lambda);
    m.put("switch_iter", cfg.switch_iter);
    m.put("lr", cfg.lr);

    auto log = train(model, data, cfg);
    write_file(dir / "loss_log.csv", loss_log_csv(log));
    save_checkpoint(model, (dir / "model.ckpt").string());
    write_manifest(dir, "train", std::move(m));
    std::printf("trained %s, final loss %.6g, checkpoint at %s\n", a.model.c_str(),
                log.back().total, (dir / "model.ckpt").string().c_str());
    return 0;
}

struct RefineArgs {
    std::string ckpt, input, reference, preset = "toy-7", out = ".";
    double unit_scale = 0.01, fps = 30.0, sigma = 0.0;
    int length = 24;
    uint64_t seed = 0;
};

int cmd_refine(const RefineArgs& a) {
    auto dir = ensure_out_dir(a.out);
    HmVae model = load_checkpoint(a.ckpt);

    MotionClip noisy, reference;
    bool have_ref = false;
    if (!a.input.empty()) {
        noisy = load_motion(a.input, a.preset, a.unit_scale, a.fps);
        if (!a.reference.empty()) {
            reference = load_motion(a.reference, a.preset, a.unit_scale, a.fps);
            have_ref = true;
        }
    } else {
        // self-contained demo: corrupt a synthetic sequence and refine it
        reference = synth_clip(a.preset, a.length, a.seed);
        MotionWindow w = clip_to_window(reference);
        RandomStream rng(a.seed + 1);
        double sigma = a.sigma > 0 ? a.sigma : 0.05;
        for (auto& v : w.rot6) v += sigma * rng.normal();
        noisy = window_to_clip(w, reference.skeleton, reference.fps);
        have_ref = true;
    }

    auto refined = refine_sequence(model, noisy);
    write_file(dir / "refined.bvh", write_bvh(refined));

    Manifest m;
    m.put("ckpt", a.ckpt);
    m.put("input", a.input.empty() ? "synthetic" : a.input);
    m.put("frames", refined.frame_count());
    m.put("seed", a.seed);
    if (have_ref) {
        auto before = evaluate(noisy.frames, reference.frames, reference.skeleton);
        auto after = evaluate(refined.frames, reference.frames, reference.skeleton);
        write_file(dir / "metrics.json",
                   "{\n  \"input\": " + to_json(before) + ",\n  \"refined\": " +
                       to_json(after) + "\n}\n");
        std::printf("accel error %.4f -> %.4f, mpjpe %.4f -> %.4f\n", before.accel_err,
                    after.accel_err, before.mpjpe, after.mpjpe);
    }
    write_manifest(dir, "refine", std::move(m));
    return 0;
}

struct InterpArgs {
    std::string ckpt, input, baseline = "slerp", preset = "toy-7", out = ".";
    int gap = 5, phase1 = 25, phase2 = 50;
    double unit_scale = 0.01, fps = 30.0;
    uint64_t seed = 0;
};

int cmd_interpolate(const InterpArgs& a) {
    auto dir = ensure_out_dir(a.out);
    HmVae model = load_checkpoint(a.ckpt);
    const int T = model.arch().window;
    if (a.gap > T - 2)
        throw std::runtime_error("gap " + std::to_string(a.gap) +
                                 " leaves no key frame on both sides of window " +
                                 std::to_string(T));
    const int lead = (T - a.gap + 1) / 2;
    const int trail = T - a.gap - lead;

    MotionClip clip = a.input.empty() ? synth_clip(a.preset, T, a.seed)
                                      : load_motion(a.input, a.preset, a.unit_scale, a.fps);
    if (clip.frame_count() < T)
        throw std::runtime_error("input shorter than the model window");
    MotionWindow gt = window(clip, T, clip.frame_count())[0];

    auto mask = make_keyframe_mask(T, lead, trail);
    mask.targets = gt.rot6;
    OptimConfig cfg;
    cfg.phase1_iters = a.phase1;
    cfg.phase2_iters = a.phase2;
    cfg.seed = a.seed;
    auto res = optimize_latent(model, mask, cfg);
    res.window.root_pos = gt.root_pos;

    auto base = keyframe_baseline(gt, lead, trail, a.baseline);

    auto gt_clip = window_to_clip(gt, model.skeleton(), clip.fps);
    auto opt_clip = window_to_clip(res.window, model.skeleton(), clip.fps);
    auto base_clip = window_to_clip(base, model.skeleton(), clip.fps);
    write_file(dir / "optimized.bvh", write_bvh(opt_clip));
    write_file(dir / "baseline.bvh", write_bvh(base_clip));
    write_file(dir / "trace.jsonl", optim_trace_jsonl(res.trace));

    auto opt_rep = evaluate(opt_clip.frames, gt_clip.frames, model.skeleton());
    auto base_rep = evaluate(base_clip.frames, gt_clip.frames, model.skeleton());
    write_file(dir / "metrics.json", report_pair_json(opt_rep, base_rep));

    Manifest m;
    m.put("ckpt", a.ckpt);
    m.put("gap", a.gap);
    m.put("lead", lead);
    m.put("trail", trail);
    m.put("baseline", a.baseline);
    m.put("phase1", a.phase1);
    m.put("phase2", a.phase2);
    m.put("seed", a.seed);
    write_manifest(dir, "interpolate", std::move(m));
    std::printf("pa_mpjpe optimized %.4f vs %s %.4f\n", opt_rep.pa_mpjpe, a.baseline.c_str(),
                base_rep.pa_mpjpe);
    return 0;
}

struct CompleteArgs {
    std::string ckpt, input, part = "upper", preset = "toy-7", out = ".";
    int phase1 = 100, phase2 = 200;
    double unit_scale = 0.01, fps = 30.0;
    uint64_t seed = 0;
};

int cmd_complete(const CompleteArgs& a) {
    auto dir = ensure_out_dir(a.out);
    HmVae model = load_checkpoint(a.ckpt);
    const int T = model.arch().window;

    MotionClip clip = a.input.empty() ? synth_clip(a.preset, T, a.seed)
                                      : load_motion(a.input, a.preset, a.unit_scale, a.fps);
    if (clip.frame_count() < T)
        throw std::runtime_error("input shorter than the model window");
    MotionWindow gt = window(clip, T, clip.frame_count())[0];

    auto mask = make_body_part_mask(model.skeleton(), a.part);
    mask.targets = gt.rot6;
    OptimConfig cfg;
    cfg.phase1_iters = a.phase1;
    cfg.phase2_iters = a.phase2;
    cfg.seed = a.seed;
    auto res = optimize_latent(model, mask, cfg);
    res.window.root_pos = gt.root_pos;

    auto gt_clip = window_to_clip(gt, model.skeleton(), clip.fps);
    auto out_clip = window_to_clip(res.window, model.skeleton(), clip.fps);
    write_file(dir / "completed.bvh", write_bvh(out_clip));
    write_file(dir / "trace.jsonl", optim_trace_jsonl(res.trace));
    auto rep = evaluate(out_clip.frames, gt_clip.frames, model.skeleton());
    write_file(dir / "metrics.json", to_json(rep) + "\n");

    Manifest m;
    m.put("ckpt", a.ckpt);
    m.put("part", a.part);
    m.put("phase1", a.phase1);
    m.put("phase2", a.phase2);
    m.put("seed", a.seed);
    write_manifest(dir, "complete", std::move(m));
    std::printf("completion mpjpe %.4f, pa_mpjpe %.4f\n", rep.mpjpe, rep.pa_mpjpe);
    return 0;
}

struct EvalArgs {
    std::string pred, ref, preset = "toy-7", out = ".";
    double unit_scale = 0.01, fps = 30.0;
};

int cmd_eval(const EvalArgs& a) {
    auto dir = ensure_out_dir(a.out);
    auto pred = load_motion(a.pred, a.preset, a.unit_scale, a.fps);
    auto ref = load_motion(a.ref, a.preset, a.unit_scale, a.fps);
    auto rep = evaluate(pred.frames, ref.frames, ref.skeleton);
    std::string json = to_json(rep) + "\n";
    write_file(dir / "metrics.json", json);
    std::fputs(json.c_str(), stdout);
    Manifest m;
    m.put("pred", a.pred);
    m.put("ref", a.ref);
    write_manifest(dir, "eval", std::move(m));
    return 0;
}

struct SynthArgs {
    std::string preset = "toy-7", out = ".";
    int clips = 4, length = 64;
    double fps = 30.0;
    uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
    auto dir = ensure_out_dir(a.out);
    SynthConfig sc;
    sc.preset = a.preset;
    sc.seed = a.seed;
    sc.length = a.length;
    sc.fps = a.fps;
    auto clips = synth_dataset(sc, a.clips);
    for (int i = 0; i < (int)clips.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "clip_%03d.bvh", i);
        write_file(dir / name, write_bvh(clips[i]));
    }
    Manifest m;
    m.put("preset", a.preset);
    m.put("clips", a.clips);
    m.put("length", a.length);
    m.put("fps", a.fps);
    m.put("seed", a.seed);
    write_manifest(dir, "synth", std::move(m));
    std::printf("wrote %d clips to %s\n", a.clips, dir.string().c_str());
    return 0;
}

struct GradArgs {
    std::string out = ".";
    int seeds = 3;
    double tolerance = 1e-5;
};

int cmd_gradcheck(const GradArgs& a) {
    auto dir = ensure_out_dir(a.out);
    auto items = run_gradient_suite(a.seeds);
    bool ok = true;
    std::string report;
    for (const auto& it : items) {
        bool pass = it.worst < a.tolerance;
        ok = ok && pass;
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-24s %.3e  %s\n", it.name.c_str(), it.worst,
                      pass ? "ok" : "FAIL");
        report += buf;
        std::fputs(buf, stdout);
    }
    write_file(dir / "gradcheck.txt", report);
    Manifest m;
    m.put("seeds", a.seeds);
    m.put("tolerance", a.tolerance);
    write_manifest(dir, "gradcheck", std::move(m));
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    // the config file is located before CLI11 runs so its values can serve
    // as defaults that explicit flags then override
    Settings st;
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--config" && i + 1 < argc)
            st.file = load_config(argv[i + 1]);
        else if (a.rfind("--config=", 0) == 0)
            st.file = load_config(a.substr(9));
    }

    CLI::App app{"hierarchical motion prior toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "flat key = value defaults file");
    int threads = st.get("threads", 0);
    app.add_option("--threads", threads, "cap OpenMP workers (1 = bit-deterministic)");

    uint64_t seed_default = st.get<uint64_t>("seed", env_seed());

    TrainArgs tr;
    tr.model = st.get("model", tr.model.c_str());
    tr.preset = st.get("preset", tr.preset.c_str());
    tr.out = st.get("out", tr.out.c_str());
    tr.window = st.get("window", tr.window);
    tr.clips = st.get("clips", tr.clips);
    tr.length = st.get("length", tr.length);
    tr.iters = st.get("iters", tr.iters);
    tr.batch = st.get("batch", tr.batch);
    tr.switch_iter = st.get("switch_iter", tr.switch_iter);
    tr.beta = st.get("beta", tr.beta);
    tr.lambda = st.get("lambda", tr.lambda);
    tr.lr = st.get("lr", tr.lr);
    tr.seed = seed_default;
    tr.data_seed = st.get<uint64_t>("data_seed", tr.data_seed);
    auto* c_train = app.add_subcommand("train", "fit a motion or trajectory model");
    c_train->add_option("--model", tr.model, "hmvae | mvae | tcnvae | trajectory")
        ->check(CLI::IsMember({"hmvae", "mvae", "tcnvae", "trajectory"}));
    c_train->add_option("--preset", tr.preset)->check(CLI::IsMember({"toy-7", "smpl-24"}));
    c_train->add_option("--out", tr.out);
    c_train->add_option("--window", tr.window);
    c_train->add_option("--clips", tr.clips);
    c_train->add_option("--length", tr.length);
    c_train->add_option("--iters", tr.iters);
    c_train->add_option("--batch", tr.batch);
    c_train->add_option("--switch-iter", tr.switch_iter);
    c_train->add_option("--beta", tr.beta);
    c_train->add_option("--lambda", tr.lambda);
    c_train->add_option("--lr", tr.lr);
    c_train->add_option("--seed", tr.seed);
    c_train->add_option("--data-seed", tr.data_seed);

    RefineArgs rf;
    rf.preset = st.get("preset", rf.preset.c_str());
    rf.out = st.get("out", rf.out.c_str());
    rf.sigma = st.get("sigma", rf.sigma);
    rf.length = st.get("length", rf.length);
    rf.seed = seed_default;
    auto* c_refine = app.add_subcommand("refine", "denoise a sequence through the prior");
    c_refine->add_option("--ckpt", rf.ckpt)->required();
    c_refine->add_option("--input", rf.input, "BVH or CSV; omitted = synthetic demo");
    c_refine->add_option("--reference", rf.reference, "clean sequence for metrics");
    c_refine->add_option("--preset", rf.preset);
    c_refine->add_option("--out", rf.out);
    c_refine->add_option("--unit-scale", rf.unit_scale);
    c_refine->add_option("--fps", rf.fps);
    c_refine->add_option("--sigma", rf.sigma, "demo corruption level");
    c_refine->add_option("--length", rf.length, "demo sequence length");
    c_refine->add_option("--seed", rf.seed);

    InterpArgs ip;
    ip.baseline = st.get("baseline", ip.baseline.c_str());
    ip.preset = st.get("preset", ip.preset.c_str());
    ip.out = st.get("out", ip.out.c_str());
    ip.gap = st.get("gap", ip.gap);
    ip.phase1 = st.get("phase1", ip.phase1);
    ip.phase2 = st.get("phase2", ip.phase2);
    ip.seed = seed_default;
    auto* c_interp = app.add_subcommand("interpolate", "fill a keyframe gap");
    c_interp->add_option("--ckpt", ip.ckpt)->required();
    c_interp->add_option("--input", ip.input);
    c_interp->add_option("--gap", ip.gap, "frames to synthesize")
        ->check(CLI::IsMember({5, 15, 30, 45}) | CLI::Range(1, 1 << 20));
    c_interp->add_option("--baseline", ip.baseline)->check(CLI::IsMember({"slerp", "lerp"}));
    c_interp->add_option("--preset", ip.preset);
    c_interp->add_option("--out", ip.out);
    c_interp->add_option("--phase1", ip.phase1);
    c_interp->add_option("--phase2", ip.phase2);
    c_interp->add_option("--unit-scale", ip.unit_scale);
    c_interp->add_option("--fps", ip.fps);
    c_interp->add_option("--seed", ip.seed);

    CompleteArgs cp;
    cp.part = st.get("part", cp.part.c_str());
    cp.preset = st.get("preset", cp.preset.c_str());
    cp.out = st.get("out", cp.out.c_str());
    cp.phase1 = st.get("phase1", cp.phase1);
    cp.phase2 = st.get("phase2", cp.phase2);
    cp.seed = seed_default;
    auto* c_complete = app.add_subcommand("complete", "fill unobserved joints");
    c_complete->add_option("--ckpt", cp.ckpt)->required();
    c_complete->add_option("--input", cp.input);
    c_complete->add_option("--part", cp.part, "observed joints")
        ->check(CLI::IsMember({"upper", "all"}));
    c_complete->add_option("--preset", cp.preset);
    c_complete->add_option("--out", cp.out);
    c_complete->add_option("--phase1", cp.phase1);
    c_complete->add_option("--phase2", cp.phase2);
    c_complete->add_option("--unit-scale", cp.unit_scale);
    c_complete->add_option("--fps", cp.fps);
    c_complete->add_option("--seed", cp.seed);

    EvalArgs ev;
    ev.preset = st.get("preset", ev.preset.c_str());
    ev.out = st.get("out", ev.out.c_str());
    auto* c_eval = app.add_subcommand("eval", "metric report for two motion files");
    c_eval->add_option("pred", ev.pred)->required();
    c_eval->add_option("ref", ev.ref)->required();
    c_eval->add_option("--preset", ev.preset);
    c_eval->add_option("--out", ev.out);
    c_eval->add_option("--unit-scale", ev.unit_scale);
    c_eval->add_option("--fps", ev.fps);

    SynthArgs sy;
    sy.preset = st.get("preset", sy.preset.c_str());
    sy.out = st.get("out", sy.out.c_str());
    sy.clips = st.get("clips", sy.clips);
    sy.length = st.get("length", sy.length);
    sy.fps = st.get("fps", sy.fps);
    sy.seed = seed_default;
    auto* c_synth = app.add_subcommand("synth", "generate BVH clips");
    c_synth->add_option("--preset", sy.preset)->check(CLI::IsMember({"toy-7", "smpl-24"}));
    c_synth->add_option("--out", sy.out);
    c_synth->add_option("--clips", sy.clips);
    c_synth->add_option("--length", sy.length);
    c_synth->add_option("--fps", sy.fps);
    c_synth->add_option("--seed", sy.seed);

    GradArgs gc;
    gc.out = st.get("out", gc.out.c_str());
    gc.seeds = st.get("gradcheck_seeds", gc.seeds);
    auto* c_grad = app.add_subcommand("gradcheck", "finite-difference self check");
    c_grad->add_option("--out", gc.out);
    c_grad->add_option("--seeds", gc.seeds);
    c_grad->add_option("--tolerance", gc.tolerance);

    // app-level flags stay usable after the subcommand name
    for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints usage or the parse diagnostic
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (c_train->parsed()) return cmd_train(tr);
        if (c_refine->parsed()) return cmd_refine(rf);
        if (c_interp->parsed()) return cmd_interpolate(ip);
        if (c_complete->parsed()) return cmd_complete(cp);
        if (c_eval->parsed()) return cmd_eval(ev);
        if (c_synth->parsed()) return cmd_synth(sy);
        if (c_grad->parsed()) return cmd_gradcheck(gc);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
