#include "motion_prior/data.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mp {

namespace {

constexpr double kTau = 6.28318530717958647692;

struct Tok {
    std::string text;
    int line = 0;
};

std::vector<Tok> tokenize(const std::string& text) {
    std::vector<Tok> toks;
    std::string cur;
    int line = 1;
    auto flush = [&](int at) {
        if (!cur.empty()) {
            toks.push_back({cur, at});
            cur.clear();
        }
    };
    for (char c : text) {
        if (c == '\n') {
            flush(line);
            ++line;
        } else if (c == ' ' || c == '\t' || c == '\r') {
            flush(line);
        } else {
            cur.push_back(c);
        }
    }
    flush(line);
    return toks;
}

[[noreturn]] void fail(const std::string& msg, int line) {
    throw std::runtime_error("bvh: " + msg + " (line " + std::to_string(line) + ")");
}

struct BvhParser {
    std::vector<Tok> toks;
    size_t pos = 0;

    bool done() const { return pos >= toks.size(); }
    int here() const { return done() ? (toks.empty() ? 1 : toks.back().line) : toks[pos].line; }

    const Tok& next(const char* what) {
        if (done()) fail(std::string("unexpected end of file, expected ") + what, here());
        return toks[pos++];
    }
    void expect(const std::string& word) {
        const Tok& t = next(word.c_str());
        if (t.text != word) fail("expected '" + word + "', got '" + t.text + "'", t.line);
    }
    double number(const char* what) {
        const Tok& t = next(what);
        try {
            size_t used = 0;
            double v = std::stod(t.text, &used);
            if (used != t.text.size()) throw std::invalid_argument(t.text);
            return v;
        } catch (const std::exception&) {
            fail(std::string("expected a number for ") + what + ", got '" + t.text + "'", t.line);
        }
    }
};

bool channel_token_valid(const std::string& ch) {
    static const std::set<std::string> known = {"Xposition", "Yposition", "Zposition",
                                               "Xrotation", "Yrotation", "Zrotation"};
    return known.count(ch) > 0;
}

void parse_joint(BvhParser& p, int parent, double unit_scale, Skeleton& skel, BvhMeta& meta) {
    const Tok& name = p.next("joint name");
    int index = skel.joint_count();
    skel.joints.push_back({name.text, parent, {}});
    meta.joints.push_back({});
    p.expect("{");
    p.expect("OFFSET");
    double ox = p.number("OFFSET x"), oy = p.number("OFFSET y"), oz = p.number("OFFSET z");
    skel.joints[index].offset = {ox * unit_scale, oy * unit_scale, oz * unit_scale};
    p.expect("CHANNELS");
    int n = static_cast<int>(p.number("channel count"));
    for (int i = 0; i < n; ++i) {
        const Tok& ch = p.next("channel name");
        if (!channel_token_valid(ch.text)) fail("unknown channel token '" + ch.text + "'", ch.line);
        meta.joints[index].channels.push_back(ch.text);
    }
    while (true) {
        const Tok& t = p.next("'JOINT', 'End' or '}'");
        if (t.text == "}") return;
        if (t.text == "JOINT") {
            parse_joint(p, index, unit_scale, skel, meta);
        } else if (t.text == "End") {
            p.expect("Site");
            p.expect("{");
            p.expect("OFFSET");
            double ex = p.number("end site x"), ey = p.number("end site y"),
                   ez = p.number("end site z");
            meta.joints[index].has_end_site = true;
            meta.joints[index].end_site_offset = {ex * unit_scale, ey * unit_scale,
                                                  ez * unit_scale};
            p.expect("}");
        } else {
            fail("expected 'JOINT', 'End' or '}', got '" + t.text + "'", t.line);
        }
    }
}

void format_number(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    out += buf;
}

void write_joint(std::string& out, const MotionClip& clip, const BvhMeta& meta,
                 const std::vector<std::vector<int>>& children, int j, int depth) {
    std::string indent(static_cast<size_t>(depth) * 2, ' ');
    out += indent + (depth == 0 ? "ROOT " : "JOINT ") + clip.skeleton.joints[j].name + "\n";
    out += indent + "{\n";
    std::string inner(static_cast<size_t>(depth + 1) * 2, ' ');
    const Vec3& off = clip.skeleton.joints[j].offset;
    out += inner + "OFFSET ";
    format_number(out, off.x / meta.unit_scale);
    out += ' ';
    format_number(out, off.y / meta.unit_scale);
    out += ' ';
    format_number(out, off.z / meta.unit_scale);
    out += '\n';
    out += inner + "CHANNELS " + std::to_string(meta.joints[j].channels.size());
    for (const auto& ch : meta.joints[j].channels) out += " " + ch;
    out += '\n';
    for (int c : children[j]) write_joint(out, clip, meta, children, c, depth + 1);
    if (meta.joints[j].has_end_site) {
        out += inner + "End Site\n" + inner + "{\n";
        out += inner + "  OFFSET ";
        format_number(out, meta.joints[j].end_site_offset.x / meta.unit_scale);
        out += ' ';
        format_number(out, meta.joints[j].end_site_offset.y / meta.unit_scale);
        out += ' ';
        format_number(out, meta.joints[j].end_site_offset.z / meta.unit_scale);
        out += '\n' + inner + "}\n";
    }
    out += indent + "}\n";
}

}  // namespace

MotionClip parse_bvh(const std::string& text, double unit_scale, BvhMeta* meta_out) {
    BvhParser p{tokenize(text)};
    MotionClip clip;
    BvhMeta meta;
    meta.unit_scale = unit_scale;
    p.expect("HIERARCHY");
    p.expect("ROOT");
    parse_joint(p, -1, unit_scale, clip.skeleton, meta);
    if (p.done()) fail("missing MOTION section", p.here());
    p.expect("MOTION");
    p.expect("Frames:");
    int frames = static_cast<int>(p.number("frame count"));
    p.expect("Frame");
    p.expect("Time:");
    double frame_time = p.number("frame time");
    if (frame_time <= 0) fail("frame time must be positive", p.here());
    clip.fps = 1.0 / frame_time;

    int J = clip.skeleton.joint_count();
    int root = clip.skeleton.root();
    for (int f = 0; f < frames; ++f) {
        Pose pose;
        pose.rotations.assign(J, Mat3::identity());
        for (int j = 0; j < J; ++j) {
            Vec3 position;
            Mat3 R = Mat3::identity();
            for (const auto& ch : meta.joints[j].channels) {
                if (p.done())
                    fail("channel/frame-count mismatch: file ends inside frame " +
                             std::to_string(f),
                         p.here());
                double v = p.number("channel value");
                if (ch == "Xposition") position.x = v * unit_scale;
                else if (ch == "Yposition") position.y = v * unit_scale;
                else if (ch == "Zposition") position.z = v * unit_scale;
                else R = R * axis_rotation(ch[0], v);
            }
            pose.rotations[j] = R;
            if (j == root) pose.root_translation = position;
        }
        clip.frames.push_back(std::move(pose));
    }
    if (!p.done())
        fail("channel/frame-count mismatch: " + std::to_string(p.toks.size() - p.pos) +
                 " extra values after " + std::to_string(frames) + " frames",
             p.here());
    clip.skeleton.validate();
    if (meta_out) *meta_out = meta;
    return clip;
}

std::string write_bvh(const MotionClip& clip, const BvhMeta* meta_in) {
    clip.skeleton.validate();
    int J = clip.skeleton.joint_count();
    BvhMeta meta;
    if (meta_in) {
        meta = *meta_in;
        if (static_cast<int>(meta.joints.size()) != J)
            throw std::invalid_argument("write_bvh: metadata joint count mismatch");
    } else {
        meta.unit_scale = 0.01;
        meta.joints.resize(J);
        auto ch = clip.skeleton.children();
        for (int j = 0; j < J; ++j) {
            if (clip.skeleton.joints[j].parent < 0)
                meta.joints[j].channels = {"Xposition", "Yposition", "Zposition",
                                           "Zrotation", "Xrotation", "Yrotation"};
            else
                meta.joints[j].channels = {"Zrotation", "Xrotation", "Yrotation"};
            if (ch[j].empty()) meta.joints[j].has_end_site = true;
        }
    }

    std::string out = "HIERARCHY\n";
    write_joint(out, clip, meta, clip.skeleton.children(), clip.skeleton.root(), 0);
    out += "MOTION\nFrames: " + std::to_string(clip.frame_count()) + "\n";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "Frame Time: %.8f\n", 1.0 / clip.fps);
    out += buf;

    for (const auto& pose : clip.frames) {
        std::string row;
        for (int j = 0; j < J; ++j) {
            // factor the rotation once per joint, in its channel order
            char order[3] = {'Z', 'X', 'Y'};
            int nrot = 0;
            for (const auto& ch : meta.joints[j].channels)
                if (ch[1] == 'r') {
                    if (nrot < 3) order[nrot] = ch[0];
                    ++nrot;
                }
            std::array<double, 3> euler{0, 0, 0};
            if (nrot == 3) {
                euler = matrix_to_euler(pose.rotations[j], order);
            } else if (nrot != 0) {
                throw std::invalid_argument("write_bvh: joint '" +
                                            clip.skeleton.joints[j].name + "' has " +
                                            std::to_string(nrot) +
                                            " rotation channels; need 0 or 3");
            }
            int rot_seen = 0;
            for (const auto& ch : meta.joints[j].channels) {
                if (!row.empty()) row += ' ';
                double v = 0;
                if (ch == "Xposition") v = pose.root_translation.x / meta.unit_scale;
                else if (ch == "Yposition") v = pose.root_translation.y / meta.unit_scale;
                else if (ch == "Zposition") v = pose.root_translation.z / meta.unit_scale;
                else v = euler[rot_seen++];
                if (clip.skeleton.joints[j].parent >= 0 && ch[1] == 'p') v = 0;  // non-root position
                format_number(row, v);
            }
        }
        out += row + "\n";
    }
    return out;
}

std::string write_motion_csv(const MotionClip& clip) {
    int J = clip.skeleton.joint_count();
    std::string out = "frame,root_tx,root_ty,root_tz";
    for (int j = 0; j < J; ++j)
        for (int k = 0; k < 6; ++k)
            out += ",j" + std::to_string(j) + "_r" + std::to_string(k);
    out += '\n';
    char buf[48];
    for (int f = 0; f < clip.frame_count(); ++f) {
        const Pose& pose = clip.frames[f];
        out += std::to_string(f);
        auto push = [&](double v) {
            std::snprintf(buf, sizeof(buf), ",%.9g", v);
            out += buf;
        };
        push(pose.root_translation.x);
        push(pose.root_translation.y);
        push(pose.root_translation.z);
        for (int j = 0; j < J; ++j) {
            Rot6 r = matrix_to_rot6d(pose.rotations[j]);
            for (double v : r) push(v);
        }
        out += '\n';
    }
    return out;
}

MotionClip parse_motion_csv(const std::string& text, const Skeleton& skeleton, double fps) {
    MotionClip clip;
    clip.skeleton = skeleton;
    clip.fps = fps;
    int J = skeleton.joint_count();
    size_t want_cols = 4 + static_cast<size_t>(J) * 6;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1) {
            if (line.rfind("frame,root_tx", 0) != 0)
                throw std::runtime_error("motion csv: missing header row");
            continue;
        }
        std::vector<double> vals;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() != want_cols)
            throw std::runtime_error("motion csv: line " + std::to_string(lineno) + " has " +
                                     std::to_string(vals.size()) + " columns, expected " +
                                     std::to_string(want_cols));
        Pose pose;
        pose.root_translation = {vals[1], vals[2], vals[3]};
        for (int j = 0; j < J; ++j) {
            Rot6 r;
            for (int k = 0; k < 6; ++k) r[k] = vals[4 + 6 * j + k];
            pose.rotations.push_back(rot6d_to_matrix(r));
        }
        clip.frames.push_back(std::move(pose));
    }
    return clip;
}

Skeleton skeleton_preset(const std::string& name) {
    if (name == "toy-7") return Skeleton::toy7();
    if (name == "smpl-24") return Skeleton::smpl24();
    throw std::invalid_argument("unknown skeleton preset '" + name + "'");
}

std::vector<MotionClip> synth_dataset(const SynthConfig& cfg, int n) {
    if (n < 1) throw std::invalid_argument("synth_dataset: n must be at least 1");
    Skeleton skel = skeleton_preset(cfg.preset);
    int J = skel.joint_count();
    RandomStream master(cfg.seed);
    std::vector<MotionClip> clips;
    for (int c = 0; c < n; ++c) {
        RandomStream rng = master.fork();
        MotionClip clip;
        clip.skeleton = skel;
        clip.fps = cfg.fps;
        std::vector<char> axis(J);
        std::vector<double> amp(J), freq(J), phase(J);
        for (int j = 0; j < J; ++j) {
            axis[j] = "XYZ"[rng.index(3)];
            amp[j] = rng.uniform(cfg.amp_min_deg, cfg.amp_max_deg);
            freq[j] = rng.uniform(cfg.freq_min, cfg.freq_max);
            phase[j] = rng.uniform(0.0, 1.0);
        }
        // slow global yaw so root-local positions stay informative
        double yaw_amp = rng.uniform(20.0, 60.0);
        double yaw_freq = freq[0] * 0.25;
        // planar root velocity tied to the first two joint phases (meters/frame)
        double vel_amp = 0.02;
        Vec3 g{0, 0, 0};
        for (int t = 0; t < cfg.length; ++t) {
            Pose pose;
            pose.rotations.resize(J);
            pose.rotations[skel.root()] =
                axis_rotation('Y', yaw_amp * std::sin(kTau * (yaw_freq * t + phase[0])));
            for (int j = 0; j < J; ++j) {
                if (j == skel.root()) continue;
                double angle = amp[j] * std::sin(kTau * (freq[j] * t + phase[j]));
                pose.rotations[j] = axis_rotation(axis[j], angle);
            }
            Vec3 v{vel_amp * std::sin(kTau * (freq[1] * t + phase[1])), 0.0,
                   vel_amp * std::sin(kTau * (freq[2 % J] * t + phase[2 % J]))};
            g = g + v;  // inclusive: G_t includes V_t
            pose.root_translation = g;
            clip.frames.push_back(std::move(pose));
        }
        clips.push_back(std::move(clip));
    }
    return clips;
}

std::vector<MotionWindow> window(const MotionClip& clip, int T, int stride) {
    if (stride < 1) throw std::invalid_argument("window: stride must be positive");
    int L = clip.frame_count();
    if (L < T)
        throw std::invalid_argument("window: clip has " + std::to_string(L) +
                                    " frames, need at least " + std::to_string(T));
    int J = clip.skeleton.joint_count();
    std::vector<MotionWindow> out;
    for (int start = 0; start + T <= L; start += stride) {
        MotionWindow w;
        w.T = T;
        w.J = J;
        w.rot6.reserve(static_cast<size_t>(T) * J * 6);
        w.root_pos.reserve(static_cast<size_t>(T) * 3);
        for (int t = 0; t < T; ++t) {
            const Pose& pose = clip.frames[start + t];
            for (int j = 0; j < J; ++j) {
                Rot6 r = matrix_to_rot6d(pose.rotations[j]);
                w.rot6.insert(w.rot6.end(), r.begin(), r.end());
            }
            w.root_pos.push_back(pose.root_translation.x);
            w.root_pos.push_back(pose.root_translation.y);
            w.root_pos.push_back(pose.root_translation.z);
        }
        out.push_back(std::move(w));
    }
    return out;
}

MotionWindow clip_to_window(const MotionClip& clip) {
    auto ws = window(clip, clip.frame_count(), 1);
    return ws.front();
}

MotionClip window_to_clip(const MotionWindow& w, const Skeleton& skeleton, double fps) {
    if (w.J != skeleton.joint_count())
        throw std::invalid_argument("window_to_clip: joint count mismatch");
    MotionClip clip;
    clip.skeleton = skeleton;
    clip.fps = fps;
    for (int t = 0; t < w.T; ++t) {
        Pose pose;
        for (int j = 0; j < w.J; ++j) {
            Rot6 r;
            for (int k = 0; k < 6; ++k) r[k] = w.rot6[(static_cast<size_t>(t) * w.J + j) * 6 + k];
            pose.rotations.push_back(rot6d_to_matrix(r));
        }
        pose.root_translation = {w.root_pos[3 * t], w.root_pos[3 * t + 1], w.root_pos[3 * t + 2]};
        clip.frames.push_back(std::move(pose));
    }
    return clip;
}

MotionClip augment(const MotionClip& clip, const AugmentConfig& cfg) {
    for (int f : cfg.rate_factors)
        if (f < 1) throw std::invalid_argument("augment: rate factors must be positive");
    RandomStream rng(cfg.seed);
    int factor = cfg.rate_factors.empty()
                     ? 1
                     : cfg.rate_factors[rng.index(cfg.rate_factors.size())];
    MotionClip out;
    out.skeleton = clip.skeleton;
    out.fps = clip.fps / factor;
    for (int f = 0; f < clip.frame_count(); f += factor) out.frames.push_back(clip.frames[f]);
    if (cfg.rotate) {
        Mat3 R0 = random_rotation(rng);
        int root = clip.skeleton.root();
        for (auto& pose : out.frames) {
            pose.rotations[root] = R0 * pose.rotations[root];
            pose.root_translation = R0 * pose.root_translation;
        }
    }
    return out;
}

}  // namespace mp
