#include "motion_prior/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "motion_prior/kinematics.hpp"

namespace mp {
namespace {

void check_shapes(const PositionSeq& pred, const PositionSeq& gt) {
    if (pred.size() != gt.size())
        throw std::invalid_argument("metric: frame count mismatch");
    for (size_t f = 0; f < pred.size(); ++f)
        if (pred[f].size() != gt[f].size() || pred[f].empty())
            throw std::invalid_argument("metric: joint count mismatch at frame " +
                                        std::to_string(f));
}

double mean_over(const std::vector<double>& frame_sums, size_t per_frame) {
    double total = 0;
    for (double s : frame_sums) total += s;
    return total / (double)(frame_sums.size() * per_frame);
}

}  // namespace

double mpjpe(const PositionSeq& pred, const PositionSeq& gt, int root) {
    check_shapes(pred, gt);
    const int T = (int)pred.size();
    const int J = (int)pred[0].size();
    if (root < 0 || root >= J) throw std::invalid_argument("mpjpe: root out of range");
    if (J < 2) throw std::invalid_argument("mpjpe: need at least one non-root joint");

    std::vector<double> sums(T, 0.0);
#pragma omp parallel for schedule(static)
    for (int f = 0; f < T; ++f) {
        double s = 0;
        for (int j = 0; j < J; ++j) {
            if (j == root) continue;
            Vec3 d = (pred[f][j] - pred[f][root]) - (gt[f][j] - gt[f][root]);
            s += d.norm();
        }
        sums[f] = s;
    }
    return 1000.0 * mean_over(sums, (size_t)(J - 1));
}

double pa_mpjpe(const PositionSeq& pred, const PositionSeq& gt, int root) {
    check_shapes(pred, gt);
    const int T = (int)pred.size();
    const int J = (int)pred[0].size();
    if (root < 0 || root >= J) throw std::invalid_argument("pa_mpjpe: root out of range");
    if (J < 3) throw std::invalid_argument("pa_mpjpe: need at least 3 joints");

    std::vector<double> sums(T, 0.0);
    std::vector<char> degenerate(T, 0);
#pragma omp parallel for schedule(static)
    for (int f = 0; f < T; ++f) {
        Eigen::Matrix3Xd X(3, J), Y(3, J);
        for (int j = 0; j < J; ++j) {
            X.col(j) << pred[f][j].x, pred[f][j].y, pred[f][j].z;
            Y.col(j) << gt[f][j].x, gt[f][j].y, gt[f][j].z;
        }
        Eigen::Vector3d mx = X.rowwise().mean(), my = Y.rowwise().mean();
        X.colwise() -= mx;
        Y.colwise() -= my;

        // collinear joints leave the rotation underdetermined
        auto thin = [](const Eigen::Matrix3Xd& M) {
            Eigen::Vector3d ev =
                Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(M * M.transpose())
                    .eigenvalues();  // ascending
            return ev(1) <= 1e-12 * std::max(ev(2), 1e-300);
        };
        if (thin(X) || thin(Y)) {
            degenerate[f] = 1;
            continue;
        }

        double var_x = X.squaredNorm() / J;
        Eigen::Matrix3d C = Y * X.transpose() / J;
        Eigen::JacobiSVD<Eigen::Matrix3d> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::Vector3d S(1, 1, 1);
        if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) S(2) = -1;
        Eigen::Matrix3d R = svd.matrixU() * S.asDiagonal() * svd.matrixV().transpose();
        double c = svd.singularValues().dot(S) / var_x;
        Eigen::Vector3d t = my - c * R * mx;

        double s = 0;
        for (int j = 0; j < J; ++j) {
            if (j == root) continue;
            Eigen::Vector3d p(pred[f][j].x, pred[f][j].y, pred[f][j].z);
            Eigen::Vector3d g(gt[f][j].x, gt[f][j].y, gt[f][j].z);
            s += (c * R * p + t - g).norm();
        }
        sums[f] = s;
    }
    for (int f = 0; f < T; ++f)
        if (degenerate[f])
            throw std::invalid_argument("pa_mpjpe: collinear joints at frame " +
                                        std::to_string(f));
    return 1000.0 * mean_over(sums, (size_t)(J - 1));
}

std::pair<double, double> accel_metrics(const PositionSeq& pred, const PositionSeq& gt) {
    check_shapes(pred, gt);
    const int T = (int)pred.size();
    const int J = (int)pred[0].size();
    if (T < 3) throw std::invalid_argument("accel_metrics: need at least 3 frames");

    std::vector<double> a_sums(T - 2, 0.0), e_sums(T - 2, 0.0);
#pragma omp parallel for schedule(static)
    for (int t = 1; t < T - 1; ++t) {
        double a = 0, e = 0;
        for (int j = 0; j < J; ++j) {
            Vec3 ap = pred[t + 1][j] - pred[t][j] * 2.0 + pred[t - 1][j];
            Vec3 ag = gt[t + 1][j] - gt[t][j] * 2.0 + gt[t - 1][j];
            a += ap.norm();
            e += (ap - ag).norm();
        }
        a_sums[t - 1] = a;
        e_sums[t - 1] = e;
    }
    return {1000.0 * mean_over(a_sums, (size_t)J), 1000.0 * mean_over(e_sums, (size_t)J)};
}

double global_quat_loss(const RotationSeq& pred, const RotationSeq& gt, const Skeleton& s) {
    if (pred.size() != gt.size())
        throw std::invalid_argument("global_quat_loss: frame count mismatch");
    const int T = (int)pred.size();
    const int J = s.joint_count();
    for (int f = 0; f < T; ++f)
        if ((int)pred[f].size() != J || (int)gt[f].size() != J)
            throw std::invalid_argument("global_quat_loss: joint count mismatch at frame " +
                                        std::to_string(f));
    auto order = s.topo_order();

    std::vector<double> sums(T, 0.0);
#pragma omp parallel for schedule(static)
    for (int f = 0; f < T; ++f) {
        std::vector<Mat3> gp(J), gg(J);
        for (int j : order) {
            int par = s.joints[j].parent;
            if (par < 0) {
                gp[j] = pred[f][j];
                gg[j] = gt[f][j];
            } else {
                gp[j] = gp[par] * pred[f][j];
                gg[j] = gg[par] * gt[f][j];
            }
        }
        double d = 0;
        for (int j = 0; j < J; ++j) {
            Quat qp = matrix_to_quat(gp[j]);
            Quat qg = matrix_to_quat(gg[j]);
            double dw = qp.w - qg.w, dx = qp.x - qg.x, dy = qp.y - qg.y, dz = qp.z - qg.z;
            d += std::sqrt(dw * dw + dx * dx + dy * dy + dz * dz);
        }
        sums[f] = d;
    }
    return mean_over(sums, (size_t)J);
}

MetricReport evaluate(const std::vector<Pose>& pred, const std::vector<Pose>& gt,
                      const Skeleton& s) {
    if (pred.size() != gt.size())
        throw std::invalid_argument("evaluate: frame count mismatch");
    const int T = (int)pred.size();
    PositionSeq pp(T), pg(T);
    RotationSeq rp(T), rg(T);
    for (int f = 0; f < T; ++f) {
        pp[f] = forward_kinematics(pred[f], s);
        pg[f] = forward_kinematics(gt[f], s);
        rp[f] = pred[f].rotations;
        rg[f] = gt[f].rotations;
    }
    MetricReport r;
    r.mpjpe = mpjpe(pp, pg, s.root());
    r.pa_mpjpe = pa_mpjpe(pp, pg, s.root());
    auto acc = accel_metrics(pp, pg);
    r.accel = acc.first;
    r.accel_err = acc.second;
    r.global_quat = global_quat_loss(rp, rg, s);
    return r;
}

std::string to_json(const MetricReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "{\"mpjpe\":%.9g,\"pa_mpjpe\":%.9g,\"accel\":%.9g,"
                  "\"accel_err\":%.9g,\"global_quat\":%.9g}",
                  r.mpjpe, r.pa_mpjpe, r.accel, r.accel_err, r.global_quat);
    return buf;
}

}  // namespace mp
