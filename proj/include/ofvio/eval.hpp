#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ofvio/geometry.hpp"
#include "ofvio/rng.hpp"
#include "ofvio/types.hpp"

namespace ofvio {

using Trajectory = std::vector<GroundTruthPose>;

struct PairedSample {
    double t = 0.0;  // estimate timestamp
    Pose est;
    Pose gt;
};

/// Nearest-timestamp pairing with |dt| <= max_dt; unmatched samples are dropped.
inline std::vector<PairedSample> associate(const Trajectory& est, const Trajectory& gt,
                                           double max_dt = 0.01) {
    if (est.empty() || gt.empty()) throw std::invalid_argument("associate: empty trajectory");
    std::vector<PairedSample> pairs;
    for (const auto& e : est) {
        auto it = std::lower_bound(gt.begin(), gt.end(), e.t,
                                   [](const GroundTruthPose& g, double t) { return g.t < t; });
        size_t idx = static_cast<size_t>(it - gt.begin());
        if (idx == gt.size()) idx = gt.size() - 1;
        if (idx > 0 && std::abs(gt[idx - 1].t - e.t) <= std::abs(gt[idx].t - e.t)) --idx;
        if (std::abs(gt[idx].t - e.t) > max_dt) continue;
        pairs.push_back({e.t, Pose(e.position, e.orientation),
                         Pose(gt[idx].position, gt[idx].orientation)});
    }
    if (pairs.empty())
        throw std::invalid_argument("associate: no pairs within " + std::to_string(max_dt) + " s");
    return pairs;
}

struct AlignmentResult {
    double scale = 1.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double rmse = 0.0;  // position residual after alignment
};

inline Vec3 apply_alignment(const AlignmentResult& a, const Vec3& p) {
    return a.scale * (a.rotation * p) + a.translation;
}

inline Trajectory apply_alignment(const AlignmentResult& a, const Trajectory& traj) {
    Trajectory out = traj;
    const Quat rq(a.rotation);
    for (auto& s : out) {
        s.position = apply_alignment(a, s.position);
        s.orientation = (rq * s.orientation).normalized();
    }
    return out;
}

namespace eval_detail {

inline double alignment_rmse(const std::vector<PairedSample>& pairs, const AlignmentResult& a) {
    double sum_sq = 0.0;
    for (const auto& p : pairs) sum_sq += (p.gt.p - apply_alignment(a, p.est.p)).squaredNorm();
    return std::sqrt(sum_sq / pairs.size());
}

}  // namespace eval_detail

/// Closed-form least-squares similarity (Umeyama): minimizes
/// sum || gt_i - (s R est_i + t) ||^2.
inline AlignmentResult align_sim3(const std::vector<PairedSample>& pairs) {
    const int n = static_cast<int>(pairs.size());
    if (n < 3) throw std::invalid_argument("align_sim3: need at least 3 pairs");

    Vec3 mean_est = Vec3::Zero(), mean_gt = Vec3::Zero();
    for (const auto& p : pairs) {
        mean_est += p.est.p;
        mean_gt += p.gt.p;
    }
    mean_est /= n;
    mean_gt /= n;

    Mat3 cov = Mat3::Zero();
    double var_est = 0.0;
    for (const auto& p : pairs) {
        const Vec3 e = p.est.p - mean_est;
        const Vec3 g = p.gt.p - mean_gt;
        cov += g * e.transpose();
        var_est += e.squaredNorm();
    }
    cov /= n;
    var_est /= n;

    const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    if (sv(1) < 1e-12 * std::max(1.0, sv(0)) || var_est < 1e-24)
        throw std::invalid_argument("align_sim3: degenerate (collinear or coincident) positions");
    Mat3 S = Mat3::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) S(2, 2) = -1.0;

    AlignmentResult a;
    a.rotation = svd.matrixU() * S * svd.matrixV().transpose();
    a.scale = (sv.asDiagonal() * S).trace() / var_est;
    if (a.scale <= 0.0) throw std::invalid_argument("align_sim3: non-positive scale");
    a.translation = mean_gt - a.scale * (a.rotation * mean_est);
    a.rmse = eval_detail::alignment_rmse(pairs, a);
    return a;
}

/// Alignment restricted to translation plus rotation about world z (scale 1).
inline AlignmentResult align_pose_yaw(const std::vector<PairedSample>& pairs) {
    const int n = static_cast<int>(pairs.size());
    if (n < 2) throw std::invalid_argument("align_pose_yaw: need at least 2 pairs");

    Vec3 mean_est = Vec3::Zero(), mean_gt = Vec3::Zero();
    for (const auto& p : pairs) {
        mean_est += p.est.p;
        mean_gt += p.gt.p;
    }
    mean_est /= n;
    mean_gt /= n;

    double spread = 0.0;
    double A = 0.0, B = 0.0;  // cos and sin accumulators of the horizontal correlation
    for (const auto& p : pairs) {
        const Vec3 e = p.est.p - mean_est;
        const Vec3 g = p.gt.p - mean_gt;
        spread += e.squaredNorm() + g.squaredNorm();
        A += e.x() * g.x() + e.y() * g.y();
        B += e.x() * g.y() - e.y() * g.x();
    }
    if (spread < 1e-20)
        throw std::invalid_argument("align_pose_yaw: all positions identical");

    AlignmentResult a;
    const double yaw = (std::abs(A) < 1e-15 && std::abs(B) < 1e-15) ? 0.0 : std::atan2(B, A);
    a.rotation = yaw_quat(yaw).toRotationMatrix();
    a.scale = 1.0;
    a.translation = mean_gt - a.rotation * mean_est;
    a.rmse = eval_detail::alignment_rmse(pairs, a);
    return a;
}

/// RMSE of position differences plus the standard deviation of the error norms
/// (population SD). Pairs are expected to be aligned already.
inline std::pair<double, double> ate_rmse(const std::vector<PairedSample>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("ate_rmse: no pairs");
    double sum_sq = 0.0, sum = 0.0;
    std::vector<double> norms;
    norms.reserve(pairs.size());
    for (const auto& p : pairs) {
        const double e = (p.gt.p - p.est.p).norm();
        norms.push_back(e);
        sum += e;
        sum_sq += e * e;
    }
    const double n = static_cast<double>(pairs.size());
    const double rmse = std::sqrt(sum_sq / n);
    const double mean = sum / n;
    double var = 0.0;
    for (double e : norms) var += (e - mean) * (e - mean);
    return {rmse, std::sqrt(var / n)};
}

// --- Randomly sampled sub-trajectory errors ---

struct SubTrajStats {
    double length_m = 0.0;
    int samples = 0;
    double trans_median = 0.0, trans_q25 = 0.0, trans_q75 = 0.0, trans_max = 0.0;
    double rot_median_deg = 0.0, rot_q25_deg = 0.0, rot_q75_deg = 0.0, rot_max_deg = 0.0;
    std::vector<double> trans_errors;
    std::vector<double> rot_errors_deg;
};

namespace eval_detail {

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * (sorted.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - lo;
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace eval_detail

/// Relative-pose errors over randomly sampled sub-trajectories of the given
/// ground-truth path lengths. Lengths longer than the path are skipped with a
/// warning. Each length uses its own sub-seed, so runs are deterministic.
inline std::vector<SubTrajStats> subtrajectory_errors(const Trajectory& est, const Trajectory& gt,
                                                      const std::vector<double>& lengths,
                                                      int samples_per_length, uint64_t seed,
                                                      double max_dt = 0.01) {
    const auto pairs = associate(est, gt, max_dt);
    const int n = static_cast<int>(pairs.size());
    std::vector<double> path(n, 0.0);  // cumulative gt path length at each pair
    for (int i = 1; i < n; ++i) path[i] = path[i - 1] + (pairs[i].gt.p - pairs[i - 1].gt.p).norm();
    const double total = path.back();

    std::vector<SubTrajStats> out;
    for (size_t li = 0; li < lengths.size(); ++li) {
        const double L = lengths[li];
        if (L > total) {
            std::cerr << "warning: sub-trajectory length " << L << " m exceeds path length " << total
                      << " m; skipped\n";
            continue;
        }
        // valid starts: those with at least L of path remaining
        int max_start = n - 1;
        while (max_start > 0 && total - path[max_start] < L) --max_start;
        if (max_start < 1) continue;

        Rng rng(hash_combine(seed, li + 1));
        SubTrajStats stats;
        stats.length_m = L;
        for (int s = 0; s < samples_per_length; ++s) {
            const int start = static_cast<int>(rng.uniform_index(max_start + 1));
            int end = start;
            while (end < n - 1 && path[end] - path[start] < L) ++end;
            const Pose rel_gt = pairs[start].gt.inverse().compose(pairs[end].gt);
            const Pose rel_est = pairs[start].est.inverse().compose(pairs[end].est);
            const Pose err = rel_gt.inverse().compose(rel_est);
            stats.trans_errors.push_back(err.p.norm());
            stats.rot_errors_deg.push_back(quat_log(err.q).norm() * 180.0 / M_PI);
        }
        auto finalize = [](std::vector<double>& v, double& med, double& q25, double& q75, double& mx) {
            std::vector<double> sorted = v;
            std::sort(sorted.begin(), sorted.end());
            med = eval_detail::quantile_sorted(sorted, 0.5);
            q25 = eval_detail::quantile_sorted(sorted, 0.25);
            q75 = eval_detail::quantile_sorted(sorted, 0.75);
            mx = sorted.empty() ? 0.0 : sorted.back();
        };
        stats.samples = samples_per_length;
        finalize(stats.trans_errors, stats.trans_median, stats.trans_q25, stats.trans_q75,
                 stats.trans_max);
        finalize(stats.rot_errors_deg, stats.rot_median_deg, stats.rot_q25_deg, stats.rot_q75_deg,
                 stats.rot_max_deg);
        out.push_back(std::move(stats));
    }
    return out;
}

/// Pose-yaw alignment fit on the first `duration` seconds only, for drift studies.
/// The returned transform is meant to be applied to the whole estimate.
inline AlignmentResult align_prefix(const Trajectory& est, const Trajectory& gt,
                                    double duration = 15.0, double max_dt = 0.01) {
    if (est.empty() || gt.empty()) throw std::invalid_argument("align_prefix: empty trajectory");
    if (est.back().t - est.front().t < duration || gt.back().t - gt.front().t < duration)
        throw std::invalid_argument("align_prefix: trajectories must span at least " +
                                    std::to_string(duration) + " s");
    const double cutoff = est.front().t + duration;
    Trajectory prefix;
    for (const auto& s : est)
        if (s.t <= cutoff) prefix.push_back(s);
    return align_pose_yaw(associate(prefix, gt, max_dt));
}

// --- Plot emission (SVG) ---

/// Top-down (x, y) overlay of several trajectories.
inline void write_trajectory_svg(const std::vector<std::pair<std::string, Trajectory>>& items,
                                 const std::string& path) {
    double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
    for (const auto& [label, traj] : items)
        for (const auto& s : traj) {
            min_x = std::min(min_x, s.position.x());
            max_x = std::max(max_x, s.position.x());
            min_y = std::min(min_y, s.position.y());
            max_y = std::max(max_y, s.position.y());
        }
    const double span = std::max({max_x - min_x, max_y - min_y, 1e-6});
    const int size = 600, margin = 50;
    auto sx = [&](double x) { return margin + (x - min_x) / span * size; };
    auto sy = [&](double y) { return margin + size - (y - min_y) / span * size; };

    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    static const char* kColors[] = {"#4878d0", "#d65f5f", "#6acc64", "#956cb4"};
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << size + 2 * margin << "' height='"
      << size + 2 * margin + 20 * static_cast<int>(items.size())
      << "' font-family='sans-serif' font-size='12'>\n";
    int idx = 0;
    for (const auto& [label, traj] : items) {
        f << "<polyline fill='none' stroke='" << kColors[idx % 4] << "' stroke-width='1.5' points='";
        for (const auto& s : traj) f << sx(s.position.x()) << "," << sy(s.position.y()) << " ";
        f << "'/>\n";
        f << "<text x='" << margin << "' y='" << size + margin + 18 + 20 * idx << "' fill='"
          << kColors[idx % 4] << "'>" << label << "</text>\n";
        ++idx;
    }
    f << "</svg>\n";
}

/// Box plots of per-length sub-trajectory error distributions (translation).
inline void write_subtraj_svg(const std::vector<SubTrajStats>& stats, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    const int box_w = 60, gap = 40, height = 300, margin = 60;
    double max_err = 1e-9;
    for (const auto& s : stats) max_err = std::max(max_err, s.trans_max);
    const int width = margin * 2 + static_cast<int>(stats.size()) * (box_w + gap);
    auto sy = [&](double v) { return margin + height - v / max_err * height; };
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
      << height + 2 * margin << "' font-family='sans-serif' font-size='12'>\n";
    f << "<text x='10' y='20'>Translational error over sub-trajectory length [m]</text>\n";
    int x = margin;
    for (const auto& s : stats) {
        const double cx = x + box_w / 2.0;
        f << "<line x1='" << cx << "' y1='" << sy(s.trans_max) << "' x2='" << cx << "' y2='"
          << sy(s.trans_q75) << "' stroke='black'/>\n";
        f << "<rect x='" << x << "' y='" << sy(s.trans_q75) << "' width='" << box_w << "' height='"
          << std::max(1.0, sy(s.trans_q25) - sy(s.trans_q75)) << "' fill='#9ecae9' stroke='black'/>\n";
        f << "<line x1='" << x << "' y1='" << sy(s.trans_median) << "' x2='" << x + box_w << "' y2='"
          << sy(s.trans_median) << "' stroke='black' stroke-width='2'/>\n";
        f << "<text x='" << x << "' y='" << height + margin + 18 << "'>" << s.length_m << " m</text>\n";
        x += box_w + gap;
    }
    f << "</svg>\n";
}

}  // namespace ofvio
