#pragma once

// Numeric kernels behind the tensor ops. The production versions are
// OpenMP-parallel; every parallel loop writes disjoint output slots in a
// gather formulation, so results are bit-identical for any thread count.
// mp::kernels::ref holds plain serial loops kept for testing and benchmarks.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "motion_prior/common.hpp"

namespace mp {
namespace kernels {

enum class Padding { kSame, kValid };

inline int conv1d_out_len(int T, int k, int stride, Padding pad) {
    if (pad == Padding::kSame) return (T + stride - 1) / stride;
    int span = T - k;
    if (span < 0) throw std::invalid_argument("conv1d: kernel longer than input under valid padding");
    return span / stride + 1;
}

inline int conv1d_pad_left(int T, int k, int stride, Padding pad) {
    if (pad == Padding::kValid) return 0;
    int Tout = (T + stride - 1) / stride;
    int total = (Tout - 1) * stride + k - T;
    if (total < 0) total = 0;
    return total / 2;
}

// Neighborhood structure of one skeleton-conv layer, flattened for the
// kernels. Pair p covers output bone out_bone[p] and input bone in_bone[p];
// pairs of bone i occupy [offsets[i], offsets[i+1]).
struct ConvTopology {
    int bones = 0;
    std::vector<int> offsets;    // size bones+1
    std::vector<int> nbr;        // in_bone per pair
    // reverse index: for each input bone, which (pair, out_bone) read it
    std::vector<int> in_offsets;  // size bones+1
    std::vector<int> in_pair;
    std::vector<int> in_out_bone;

    int pairs() const { return static_cast<int>(nbr.size()); }

    void build_reverse() {
        in_offsets.assign(bones + 1, 0);
        for (int j : nbr) in_offsets[j + 1]++;
        for (int i = 0; i < bones; ++i) in_offsets[i + 1] += in_offsets[i];
        in_pair.resize(nbr.size());
        in_out_bone.resize(nbr.size());
        std::vector<int> cursor(in_offsets.begin(), in_offsets.end() - 1);
        for (int i = 0; i < bones; ++i) {
            for (int p = offsets[i]; p < offsets[i + 1]; ++p) {
                int j = nbr[p];
                in_pair[cursor[j]] = p;
                in_out_bone[cursor[j]] = i;
                cursor[j]++;
            }
        }
    }
};

// ---- plain temporal convolution, x[T x Cin] -> y[Tout x Cout] ----

template <class S>
void conv1d_forward(const S* x, int T, int Cin, const S* w, const S* b, int k, int Cout,
                    int stride, int pad_left, S* y, int Tout) {
#pragma omp parallel for schedule(static)
    for (int to = 0; to < Tout; ++to) {
        for (int co = 0; co < Cout; ++co) {
            S acc = b ? b[co] : S(0);
            for (int kk = 0; kk < k; ++kk) {
                int ti = to * stride + kk - pad_left;
                if (ti < 0 || ti >= T) continue;
                const S* xr = x + static_cast<int64_t>(ti) * Cin;
                const S* wr = w + (static_cast<int64_t>(kk) * Cin) * Cout + co;
                for (int ci = 0; ci < Cin; ++ci) acc += xr[ci] * wr[static_cast<int64_t>(ci) * Cout];
            }
            y[static_cast<int64_t>(to) * Cout + co] = acc;
        }
    }
}

template <class S>
void conv1d_backward_input(const S* dy, int Tout, int Cout, const S* w, int k, int Cin,
                           int stride, int pad_left, S* dx, int T) {
#pragma omp parallel for schedule(static)
    for (int ti = 0; ti < T; ++ti) {
        for (int ci = 0; ci < Cin; ++ci) {
            S acc = S(0);
            for (int kk = 0; kk < k; ++kk) {
                int num = ti + pad_left - kk;
                if (num < 0 || num % stride != 0) continue;
                int to = num / stride;
                if (to >= Tout) continue;
                const S* dyr = dy + static_cast<int64_t>(to) * Cout;
                const S* wr = w + (static_cast<int64_t>(kk) * Cin + ci) * Cout;
                for (int co = 0; co < Cout; ++co) acc += dyr[co] * wr[co];
            }
            dx[static_cast<int64_t>(ti) * Cin + ci] += acc;
        }
    }
}

template <class S>
void conv1d_backward_weight(const S* x, int T, int Cin, const S* dy, int Tout, int Cout, int k,
                            int stride, int pad_left, S* dw) {
#pragma omp parallel for schedule(static)
    for (int kk = 0; kk < k; ++kk) {
        for (int ci = 0; ci < Cin; ++ci) {
            for (int co = 0; co < Cout; ++co) {
                S acc = S(0);
                for (int to = 0; to < Tout; ++to) {
                    int ti = to * stride + kk - pad_left;
                    if (ti < 0 || ti >= T) continue;
                    acc += x[static_cast<int64_t>(ti) * Cin + ci] *
                           dy[static_cast<int64_t>(to) * Cout + co];
                }
                dw[(static_cast<int64_t>(kk) * Cin + ci) * Cout + co] += acc;
            }
        }
    }
}

template <class S>
void conv1d_backward_bias(const S* dy, int Tout, int Cout, S* db) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < Cout; ++co) {
        S acc = S(0);
        for (int to = 0; to < Tout; ++to) acc += dy[static_cast<int64_t>(to) * Cout + co];
        db[co] += acc;
    }
}

// ---- skeleton convolution, x[T x B x Cin] -> y[Tout x B x Cout] ----
// y_i = (1/|N_i|) sum_{j in N_i} (x_j * W_ij + b_ij), temporal conv per pair.

template <class S>
void skel_conv_forward(const S* x, int T, int B, int Cin, const S* w, const S* b, int k, int Cout,
                       int stride, int pad_left, const ConvTopology& topo, S* y, int Tout) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < B; ++i) {
        int p0 = topo.offsets[i], p1 = topo.offsets[i + 1];
        S inv = S(1) / S(p1 - p0);
        for (int to = 0; to < Tout; ++to) {
            S* yr = y + (static_cast<int64_t>(to) * B + i) * Cout;
            for (int co = 0; co < Cout; ++co) {
                S acc = S(0);
                for (int p = p0; p < p1; ++p) {
                    int j = topo.nbr[p];
                    const S* wp = w + ((static_cast<int64_t>(p) * k) * Cin) * Cout;
                    acc += b[static_cast<int64_t>(p) * Cout + co];
                    for (int kk = 0; kk < k; ++kk) {
                        int ti = to * stride + kk - pad_left;
                        if (ti < 0 || ti >= T) continue;
                        const S* xr = x + (static_cast<int64_t>(ti) * B + j) * Cin;
                        const S* wr = wp + (static_cast<int64_t>(kk) * Cin) * Cout + co;
                        for (int ci = 0; ci < Cin; ++ci)
                            acc += xr[ci] * wr[static_cast<int64_t>(ci) * Cout];
                    }
                }
                yr[co] = acc * inv;
            }
        }
    }
}

template <class S>
void skel_conv_backward_input(const S* dy, int Tout, int B, int Cout, const S* w, int k, int Cin,
                              int stride, int pad_left, const ConvTopology& topo, S* dx, int T) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < B; ++j) {
        for (int ti = 0; ti < T; ++ti) {
            S* dxr = dx + (static_cast<int64_t>(ti) * B + j) * Cin;
            for (int e = topo.in_offsets[j]; e < topo.in_offsets[j + 1]; ++e) {
                int p = topo.in_pair[e];
                int i = topo.in_out_bone[e];
                S inv = S(1) / S(topo.offsets[i + 1] - topo.offsets[i]);
                const S* wp = w + ((static_cast<int64_t>(p) * k) * Cin) * Cout;
                for (int kk = 0; kk < k; ++kk) {
                    int num = ti + pad_left - kk;
                    if (num < 0 || num % stride != 0) continue;
                    int to = num / stride;
                    if (to >= Tout) continue;
                    const S* dyr = dy + (static_cast<int64_t>(to) * B + i) * Cout;
                    const S* wr = wp + (static_cast<int64_t>(kk) * Cin) * Cout;
                    for (int ci = 0; ci < Cin; ++ci) {
                        S acc = S(0);
                        for (int co = 0; co < Cout; ++co)
                            acc += dyr[co] * wr[static_cast<int64_t>(ci) * Cout + co];
                        dxr[ci] += acc * inv;
                    }
                }
            }
        }
    }
}

template <class S>
void skel_conv_backward_weight(const S* x, int T, int B, int Cin, const S* dy, int Tout, int Cout,
                               int k, int stride, int pad_left, const ConvTopology& topo, S* dw,
                               S* db) {
#pragma omp parallel for schedule(static)
    for (int p = 0; p < topo.pairs(); ++p) {
        int i = 0;
        while (topo.offsets[i + 1] <= p) ++i;
        int j = topo.nbr[p];
        S inv = S(1) / S(topo.offsets[i + 1] - topo.offsets[i]);
        S* dwp = dw + ((static_cast<int64_t>(p) * k) * Cin) * Cout;
        S* dbp = db + static_cast<int64_t>(p) * Cout;
        for (int to = 0; to < Tout; ++to) {
            const S* dyr = dy + (static_cast<int64_t>(to) * B + i) * Cout;
            for (int kk = 0; kk < k; ++kk) {
                int ti = to * stride + kk - pad_left;
                if (ti < 0 || ti >= T) continue;
                const S* xr = x + (static_cast<int64_t>(ti) * B + j) * Cin;
                S* dwr = dwp + (static_cast<int64_t>(kk) * Cin) * Cout;
                for (int ci = 0; ci < Cin; ++ci) {
                    S xs = xr[ci] * inv;
                    for (int co = 0; co < Cout; ++co)
                        dwr[static_cast<int64_t>(ci) * Cout + co] += xs * dyr[co];
                }
            }
            for (int co = 0; co < Cout; ++co) dbp[co] += dyr[co] * inv;
        }
    }
}

// ---- linear, x[R x N] @ w[N x M] + b[M] -> y[R x M] ----

template <class S>
void linear_forward(const S* x, int R, int N, const S* w, const S* b, int M, S* y) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < R; ++r) {
        const S* xr = x + static_cast<int64_t>(r) * N;
        S* yr = y + static_cast<int64_t>(r) * M;
        for (int m = 0; m < M; ++m) yr[m] = b ? b[m] : S(0);
        for (int n = 0; n < N; ++n) {
            S xv = xr[n];
            const S* wr = w + static_cast<int64_t>(n) * M;
            for (int m = 0; m < M; ++m) yr[m] += xv * wr[m];
        }
    }
}

template <class S>
void linear_backward(const S* x, int R, int N, const S* w, int M, const S* dy, S* dx, S* dw,
                     S* db) {
    if (dx) {
#pragma omp parallel for schedule(static)
        for (int r = 0; r < R; ++r) {
            const S* dyr = dy + static_cast<int64_t>(r) * M;
            S* dxr = dx + static_cast<int64_t>(r) * N;
            for (int n = 0; n < N; ++n) {
                const S* wr = w + static_cast<int64_t>(n) * M;
                S acc = S(0);
                for (int m = 0; m < M; ++m) acc += dyr[m] * wr[m];
                dxr[n] += acc;
            }
        }
    }
    if (dw) {
#pragma omp parallel for schedule(static)
        for (int n = 0; n < N; ++n) {
            S* dwr = dw + static_cast<int64_t>(n) * M;
            for (int r = 0; r < R; ++r) {
                S xv = x[static_cast<int64_t>(r) * N + n];
                const S* dyr = dy + static_cast<int64_t>(r) * M;
                for (int m = 0; m < M; ++m) dwr[m] += xv * dyr[m];
            }
        }
    }
    if (db) {
        for (int r = 0; r < R; ++r) {
            const S* dyr = dy + static_cast<int64_t>(r) * M;
            for (int m = 0; m < M; ++m) db[m] += dyr[m];
        }
    }
}

// ---- Gram-Schmidt 6D -> rotation matrix, batched over N rows ----
// Row layout: input (a1, a2) two 3-vectors (two matrix columns), output
// row-major 3x3 with columns (b1, b2, b1 x b2).

template <class S>
void rot6d_forward(const S* r6, int N, S* R, S min_norm) {
    bool bad = false;
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
        const S* a = r6 + static_cast<int64_t>(n) * 6;
        S* out = R + static_cast<int64_t>(n) * 9;
        S n1 = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
        if (!(n1 > min_norm)) {
            bad = true;
            continue;
        }
        S b1[3] = {a[0] / n1, a[1] / n1, a[2] / n1};
        S dot = b1[0] * a[3] + b1[1] * a[4] + b1[2] * a[5];
        S u[3] = {a[3] - dot * b1[0], a[4] - dot * b1[1], a[5] - dot * b1[2]};
        S nu = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
        if (!(nu > min_norm)) {
            bad = true;
            continue;
        }
        S b2[3] = {u[0] / nu, u[1] / nu, u[2] / nu};
        S b3[3] = {b1[1] * b2[2] - b1[2] * b2[1], b1[2] * b2[0] - b1[0] * b2[2],
                   b1[0] * b2[1] - b1[1] * b2[0]};
        for (int r = 0; r < 3; ++r) {
            out[3 * r + 0] = b1[r];
            out[3 * r + 1] = b2[r];
            out[3 * r + 2] = b3[r];
        }
    }
    if (bad)
        throw std::domain_error("rot6d_to_matrix: degenerate 6D input (zero or parallel columns)");
}

template <class S>
void rot6d_backward(const S* r6, int N, const S* dR, S* dr6) {
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
        const S* a = r6 + static_cast<int64_t>(n) * 6;
        const S* dr = dR + static_cast<int64_t>(n) * 9;
        S* da = dr6 + static_cast<int64_t>(n) * 6;
        S n1 = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
        S b1[3] = {a[0] / n1, a[1] / n1, a[2] / n1};
        S dot = b1[0] * a[3] + b1[1] * a[4] + b1[2] * a[5];
        S u[3] = {a[3] - dot * b1[0], a[4] - dot * b1[1], a[5] - dot * b1[2]};
        S nu = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
        S b2[3] = {u[0] / nu, u[1] / nu, u[2] / nu};
        // adjoints of the three output columns
        S db1[3], db2[3], db3[3];
        for (int r = 0; r < 3; ++r) {
            db1[r] = dr[3 * r + 0];
            db2[r] = dr[3 * r + 1];
            db3[r] = dr[3 * r + 2];
        }
        // b3 = b1 x b2
        db1[0] += b2[1] * db3[2] - b2[2] * db3[1];
        db1[1] += b2[2] * db3[0] - b2[0] * db3[2];
        db1[2] += b2[0] * db3[1] - b2[1] * db3[0];
        db2[0] += db3[1] * b1[2] - db3[2] * b1[1];
        db2[1] += db3[2] * b1[0] - db3[0] * b1[2];
        db2[2] += db3[0] * b1[1] - db3[1] * b1[0];
        // b2 = u / |u|
        S d2 = b2[0] * db2[0] + b2[1] * db2[1] + b2[2] * db2[2];
        S du[3];
        for (int r = 0; r < 3; ++r) du[r] = (db2[r] - b2[r] * d2) / nu;
        // u = a2 - (b1 . a2) b1
        S bdu = b1[0] * du[0] + b1[1] * du[1] + b1[2] * du[2];
        for (int r = 0; r < 3; ++r) {
            da[3 + r] = du[r] - b1[r] * bdu;
            db1[r] += -dot * du[r] - a[3 + r] * bdu;
        }
        // b1 = a1 / |a1|
        S d1 = b1[0] * db1[0] + b1[1] * db1[1] + b1[2] * db1[2];
        for (int r = 0; r < 3; ++r) da[r] = (db1[r] - b1[r] * d1) / n1;
    }
}

// ---- forward kinematics over frames ----
// order lists joints parents-first; rotations are row-major 3x3 per joint.

template <class S>
void fk_forward(const S* rot, const S* root_trans, int T, int J, const int* parent,
                const int* order, const S* offsets, S* pos) {
#pragma omp parallel for schedule(static)
    for (int t = 0; t < T; ++t) {
        const S* Rt = rot + (static_cast<int64_t>(t) * J) * 9;
        S* pt = pos + (static_cast<int64_t>(t) * J) * 3;
        std::vector<S> glob(static_cast<size_t>(J) * 9);
        for (int oi = 0; oi < J; ++oi) {
            int j = order[oi];
            const S* Rj = Rt + static_cast<int64_t>(j) * 9;
            S* Gj = glob.data() + static_cast<int64_t>(j) * 9;
            if (parent[j] < 0) {
                for (int e = 0; e < 9; ++e) Gj[e] = Rj[e];
                for (int e = 0; e < 3; ++e)
                    pt[3 * j + e] = root_trans ? root_trans[3 * t + e] : S(0);
            } else {
                const S* Gp = glob.data() + static_cast<int64_t>(parent[j]) * 9;
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c)
                        Gj[3 * r + c] = Gp[3 * r + 0] * Rj[0 + c] + Gp[3 * r + 1] * Rj[3 + c] +
                                        Gp[3 * r + 2] * Rj[6 + c];
                const S* off = offsets + static_cast<int64_t>(j) * 3;
                const S* pp = pt + 3 * parent[j];
                for (int r = 0; r < 3; ++r)
                    pt[3 * j + r] = pp[r] + Gp[3 * r + 0] * off[0] + Gp[3 * r + 1] * off[1] +
                                    Gp[3 * r + 2] * off[2];
            }
        }
    }
}

template <class S>
void fk_backward(const S* rot, int T, int J, const int* parent, const int* order, const S* offsets,
                 const S* dpos, S* drot, S* droot_trans) {
#pragma omp parallel for schedule(static)
    for (int t = 0; t < T; ++t) {
        const S* Rt = rot + (static_cast<int64_t>(t) * J) * 9;
        const S* dpt = dpos + (static_cast<int64_t>(t) * J) * 3;
        S* drt = drot + (static_cast<int64_t>(t) * J) * 9;
        // recompute global rotations (cheaper than caching across the graph)
        std::vector<S> glob(static_cast<size_t>(J) * 9);
        for (int oi = 0; oi < J; ++oi) {
            int j = order[oi];
            const S* Rj = Rt + static_cast<int64_t>(j) * 9;
            S* Gj = glob.data() + static_cast<int64_t>(j) * 9;
            if (parent[j] < 0) {
                for (int e = 0; e < 9; ++e) Gj[e] = Rj[e];
            } else {
                const S* Gp = glob.data() + static_cast<int64_t>(parent[j]) * 9;
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c)
                        Gj[3 * r + c] = Gp[3 * r + 0] * Rj[0 + c] + Gp[3 * r + 1] * Rj[3 + c] +
                                        Gp[3 * r + 2] * Rj[6 + c];
            }
        }
        // A[j]: adjoint of position j including descendants; dG[j]: adjoint of G_j
        std::vector<S> A(static_cast<size_t>(J) * 3), dG(static_cast<size_t>(J) * 9, S(0));
        for (int j = 0; j < J; ++j)
            for (int e = 0; e < 3; ++e) A[3 * j + e] = dpt[3 * j + e];
        for (int oi = J - 1; oi >= 0; --oi) {
            int j = order[oi];
            if (parent[j] < 0) {
                S* drj = drt + static_cast<int64_t>(j) * 9;
                for (int e = 0; e < 9; ++e) drj[e] += dG[static_cast<int64_t>(j) * 9 + e];
                if (droot_trans)
                    for (int e = 0; e < 3; ++e) droot_trans[3 * t + e] += A[3 * j + e];
                continue;
            }
            int p = parent[j];
            const S* off = offsets + static_cast<int64_t>(j) * 3;
            const S* Gp = glob.data() + static_cast<int64_t>(p) * 9;
            const S* dGj = dG.data() + static_cast<int64_t>(j) * 9;
            // p_j = p_p + G_p off_j  and  G_j = G_p R_j
            for (int e = 0; e < 3; ++e) A[3 * p + e] += A[3 * j + e];
            S* dGp = dG.data() + static_cast<int64_t>(p) * 9;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) dGp[3 * r + c] += A[3 * j + r] * off[c];
            const S* Rj = Rt + static_cast<int64_t>(j) * 9;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    dGp[3 * r + c] += dGj[3 * r + 0] * Rj[3 * c + 0] + dGj[3 * r + 1] * Rj[3 * c + 1] +
                                      dGj[3 * r + 2] * Rj[3 * c + 2];
            S* drj = drt + static_cast<int64_t>(j) * 9;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    drj[3 * r + c] += Gp[3 * 0 + r] * dGj[3 * 0 + c] + Gp[3 * 1 + r] * dGj[3 * 1 + c] +
                                      Gp[3 * 2 + r] * dGj[3 * 2 + c];
        }
    }
}

// Serial reference implementations, kept for tests and the benchmark tool.
namespace ref {

template <class S>
void conv1d_forward(const S* x, int T, int Cin, const S* w, const S* b, int k, int Cout, int stride,
                    int pad_left, S* y, int Tout) {
    for (int to = 0; to < Tout; ++to)
        for (int co = 0; co < Cout; ++co) {
            S acc = b ? b[co] : S(0);
            for (int kk = 0; kk < k; ++kk) {
                int ti = to * stride + kk - pad_left;
                if (ti < 0 || ti >= T) continue;
                for (int ci = 0; ci < Cin; ++ci)
                    acc += x[static_cast<int64_t>(ti) * Cin + ci] *
                           w[(static_cast<int64_t>(kk) * Cin + ci) * Cout + co];
            }
            y[static_cast<int64_t>(to) * Cout + co] = acc;
        }
}

template <class S>
void skel_conv_forward(const S* x, int T, int B, int Cin, const S* w, const S* b, int k, int Cout,
                       int stride, int pad_left, const ConvTopology& topo, S* y, int Tout) {
    for (int i = 0; i < B; ++i) {
        int p0 = topo.offsets[i], p1 = topo.offsets[i + 1];
        S inv = S(1) / S(p1 - p0);
        for (int to = 0; to < Tout; ++to)
            for (int co = 0; co < Cout; ++co) {
                S acc = S(0);
                for (int p = p0; p < p1; ++p) {
                    int j = topo.nbr[p];
                    acc += b[static_cast<int64_t>(p) * Cout + co];
                    for (int kk = 0; kk < k; ++kk) {
                        int ti = to * stride + kk - pad_left;
                        if (ti < 0 || ti >= T) continue;
                        for (int ci = 0; ci < Cin; ++ci)
                            acc += x[(static_cast<int64_t>(ti) * B + j) * Cin + ci] *
                                   w[(((static_cast<int64_t>(p) * k + kk) * Cin) + ci) * Cout + co];
                    }
                }
                y[(static_cast<int64_t>(to) * B + i) * Cout + co] = acc * inv;
            }
    }
}

template <class S>
void linear_forward(const S* x, int R, int N, const S* w, const S* b, int M, S* y) {
    for (int r = 0; r < R; ++r)
        for (int m = 0; m < M; ++m) {
            S acc = b ? b[m] : S(0);
            for (int n = 0; n < N; ++n)
                acc += x[static_cast<int64_t>(r) * N + n] * w[static_cast<int64_t>(n) * M + m];
            y[static_cast<int64_t>(r) * M + m] = acc;
        }
}

template <class S>
void fk_forward(const S* rot, const S* root_trans, int T, int J, const int* parent,
                const int* order, const S* offsets, S* pos) {
    std::vector<S> glob(static_cast<size_t>(J) * 9);
    for (int t = 0; t < T; ++t) {
        const S* Rt = rot + (static_cast<int64_t>(t) * J) * 9;
        S* pt = pos + (static_cast<int64_t>(t) * J) * 3;
        for (int oi = 0; oi < J; ++oi) {
            int j = order[oi];
            const S* Rj = Rt + static_cast<int64_t>(j) * 9;
            S* Gj = glob.data() + static_cast<int64_t>(j) * 9;
            if (parent[j] < 0) {
                for (int e = 0; e < 9; ++e) Gj[e] = Rj[e];
                for (int e = 0; e < 3; ++e)
                    pt[3 * j + e] = root_trans ? root_trans[3 * t + e] : S(0);
                continue;
            }
            const S* Gp = glob.data() + static_cast<int64_t>(parent[j]) * 9;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    Gj[3 * r + c] = Gp[3 * r + 0] * Rj[0 + c] + Gp[3 * r + 1] * Rj[3 + c] +
                                    Gp[3 * r + 2] * Rj[6 + c];
            const S* off = offsets + static_cast<int64_t>(j) * 3;
            for (int r = 0; r < 3; ++r)
                pt[3 * j + r] = pt[3 * parent[j] + r] + Gp[3 * r + 0] * off[0] +
                                Gp[3 * r + 1] * off[1] + Gp[3 * r + 2] * off[2];
        }
    }
}

}  // namespace ref
}  // namespace kernels
}  // namespace mp
