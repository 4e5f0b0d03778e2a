// Micro-benchmark: OpenMP kernels against the serial reference that the
// tests use as an oracle. Prints one row per kernel with timings and the
// worst output difference between the two paths.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "motion_prior/skeleton.hpp"

using namespace mp;

namespace {

double now() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::vector<double> randv(RandomStream& rng, size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

template <class F>
double best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        double t0 = now();
        fn();
        best = std::min(best, now() - t0);
    }
    return best;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

void report(const char* name, const char* dims, double serial, double parallel, double diff) {
    std::printf("%-14s %-26s %9.3f ms %9.3f ms  x%-5.2f  max diff %.2e\n", name, dims,
                1e3 * serial, 1e3 * parallel, serial / parallel, diff);
}

void bench_conv1d(RandomStream& rng, int reps) {
    const int T = 4096, Cin = 32, Cout = 64, k = 3, stride = 1;
    const int pl = kernels::conv1d_pad_left(T, k, stride, kernels::Padding::kSame);
    const int Tout = kernels::conv1d_out_len(T, k, stride, kernels::Padding::kSame);
    auto x = randv(rng, (size_t)T * Cin);
    auto w = randv(rng, (size_t)k * Cin * Cout);
    auto b = randv(rng, Cout);
    std::vector<double> ys((size_t)Tout * Cout), yp(ys.size());
    double ts = best_of(reps, [&] {
        kernels::ref::conv1d_forward(x.data(), T, Cin, w.data(), b.data(), k, Cout, stride, pl,
                                     ys.data(), Tout);
    });
    double tp = best_of(reps, [&] {
        kernels::conv1d_forward(x.data(), T, Cin, w.data(), b.data(), k, Cout, stride, pl,
                                yp.data(), Tout);
    });
    report("conv1d", "[4096x32 -> 4096x64 k3]", ts, tp, max_diff(ys, yp));
}

void bench_skel_conv(RandomStream& rng, int reps) {
    auto skel = Skeleton::smpl24();
    auto graph = BoneGraph::channels_of(skel);
    auto topo = conv_topology(neighbors_within(graph, 1));
    const int T = 512, B = graph.count, Cin = 32, Cout = 32, k = 3, stride = 1;
    const int pl = kernels::conv1d_pad_left(T, k, stride, kernels::Padding::kSame);
    const int Tout = kernels::conv1d_out_len(T, k, stride, kernels::Padding::kSame);
    auto x = randv(rng, (size_t)T * B * Cin);
    auto w = randv(rng, (size_t)topo.pairs() * k * Cin * Cout);
    auto b = randv(rng, (size_t)topo.pairs() * Cout);
    std::vector<double> ys((size_t)Tout * B * Cout), yp(ys.size());
    double ts = best_of(reps, [&] {
        kernels::ref::skel_conv_forward(x.data(), T, B, Cin, w.data(), b.data(), k, Cout, stride,
                                        pl, topo, ys.data(), Tout);
    });
    double tp = best_of(reps, [&] {
        kernels::skel_conv_forward(x.data(), T, B, Cin, w.data(), b.data(), k, Cout, stride, pl,
                                   topo, yp.data(), Tout);
    });
    report("skeleton_conv", "[512x24x32 -> 512x24x32]", ts, tp, max_diff(ys, yp));
}

void bench_linear(RandomStream& rng, int reps) {
    const int R = 4096, N = 256, M = 256;
    auto x = randv(rng, (size_t)R * N);
    auto w = randv(rng, (size_t)N * M);
    auto b = randv(rng, M);
    std::vector<double> ys((size_t)R * M), yp(ys.size());
    double ts = best_of(reps, [&] {
        kernels::ref::linear_forward(x.data(), R, N, w.data(), b.data(), M, ys.data());
    });
    double tp = best_of(reps, [&] {
        kernels::linear_forward(x.data(), R, N, w.data(), b.data(), M, yp.data());
    });
    report("linear", "[4096x256 @ 256x256]", ts, tp, max_diff(ys, yp));
}

void bench_fk(RandomStream& rng, int reps) {
    auto skel = Skeleton::smpl24();
    const int T = 8192, J = skel.joint_count();
    auto parent = skel.parents();
    auto order = skel.topo_order();
    std::vector<double> offs((size_t)J * 3);
    for (int j = 0; j < J; ++j) {
        offs[3 * j + 0] = skel.joints[j].offset.x;
        offs[3 * j + 1] = skel.joints[j].offset.y;
        offs[3 * j + 2] = skel.joints[j].offset.z;
    }
    std::vector<double> rot((size_t)T * J * 9);
    for (int i = 0; i < T * J; ++i) {
        Mat3 R = random_rotation(rng);
        for (int e = 0; e < 9; ++e) rot[(size_t)i * 9 + e] = R.m[e];
    }
    auto trans = randv(rng, (size_t)T * 3);
    std::vector<double> ys((size_t)T * J * 3), yp(ys.size());
    double ts = best_of(reps, [&] {
        kernels::ref::fk_forward(rot.data(), trans.data(), T, J, parent.data(), order.data(),
                                 offs.data(), ys.data());
    });
    double tp = best_of(reps, [&] {
        kernels::fk_forward(rot.data(), trans.data(), T, J, parent.data(), order.data(),
                            offs.data(), yp.data());
    });
    report("fk", "[8192 frames x 24 joints]", ts, tp, max_diff(ys, yp));
}

}  // namespace

int main(int argc, char** argv) {
    int reps = argc > 1 ? std::atoi(argv[1]) : 5;
    std::printf("threads: %d (set OMP_NUM_THREADS to change)\n", omp_get_max_threads());
    std::printf("%-14s %-26s %12s %12s  %-6s\n", "kernel", "shape", "serial", "parallel",
                "speedup");
    RandomStream rng(1);
    bench_conv1d(rng, reps);
    bench_skel_conv(rng, reps);
    bench_linear(rng, reps);
    bench_fk(rng, reps);
    return 0;
}
