#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "ofvio/geometry.hpp"
#include "ofvio/image.hpp"
#include "ofvio/rng.hpp"
#include "ofvio/types.hpp"

namespace ofvio {

struct CornerCandidate {
    double x = 0.0;
    double y = 0.0;
    double shi_tomasi_score = 0.0;  // min eigenvalue of the gradient structure tensor
};

/// Shi-Tomasi corners: min-eigenvalue response over a 3x3 gradient window,
/// quality-thresholded, 3x3 non-max suppressed, greedily spaced >= min_distance.
inline std::vector<CornerCandidate> detect_shi_tomasi(const Image8& img, int max_corners,
                                                      double quality_ratio, double min_distance) {
    if (img.width() < 32 || img.height() < 32)
        throw std::invalid_argument("detect_shi_tomasi: image must be at least 32x32");
    const int w = img.width(), h = img.height();
    std::vector<float> response(static_cast<size_t>(w) * h, 0.0f);

    std::vector<float> ix(static_cast<size_t>(w) * h, 0.0f), iy(ix);
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x) {
            ix[static_cast<size_t>(y) * w + x] = 0.5f * (img.at(x + 1, y) - img.at(x - 1, y));
            iy[static_cast<size_t>(y) * w + x] = 0.5f * (img.at(x, y + 1) - img.at(x, y - 1));
        }
    double max_response = 0.0;
    for (int y = 2; y < h - 2; ++y)
        for (int x = 2; x < w - 2; ++x) {
            double gxx = 0, gyy = 0, gxy = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const float vx = ix[static_cast<size_t>(y + dy) * w + (x + dx)];
                    const float vy = iy[static_cast<size_t>(y + dy) * w + (x + dx)];
                    gxx += vx * vx;
                    gyy += vy * vy;
                    gxy += vx * vy;
                }
            const double tr = gxx + gyy;
            const double det_term = std::sqrt((gxx - gyy) * (gxx - gyy) + 4.0 * gxy * gxy);
            const double lambda_min = 0.5 * (tr - det_term);
            response[static_cast<size_t>(y) * w + x] = static_cast<float>(std::max(0.0, lambda_min));
            max_response = std::max(max_response, lambda_min);
        }
    if (max_response <= 0.0) return {};

    const double threshold = quality_ratio * max_response;
    std::vector<CornerCandidate> candidates;
    for (int y = 2; y < h - 2; ++y)
        for (int x = 2; x < w - 2; ++x) {
            const float r = response[static_cast<size_t>(y) * w + x];
            if (r < threshold || r <= 0.0f) continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const float rn = response[static_cast<size_t>(y + dy) * w + (x + dx)];
                    if (rn > r || (rn == r && (dy < 0 || (dy == 0 && dx < 0)))) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max) candidates.push_back({static_cast<double>(x), static_cast<double>(y), r});
        }
    std::sort(candidates.begin(), candidates.end(), [](const CornerCandidate& a, const CornerCandidate& b) {
        if (a.shi_tomasi_score != b.shi_tomasi_score) return a.shi_tomasi_score > b.shi_tomasi_score;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });

    std::vector<CornerCandidate> out;
    const double min_d2 = min_distance * min_distance;
    for (const auto& c : candidates) {
        bool ok = true;
        for (const auto& a : out) {
            const double dx = c.x - a.x, dy = c.y - a.y;
            if (dx * dx + dy * dy < min_d2) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        out.push_back(c);
        if (static_cast<int>(out.size()) >= max_corners) break;
    }
    return out;
}

// --- Pyramidal translation-only Lucas-Kanade ---

struct LkConfig {
    int window = 21;  // odd
    int pyramid_levels = 3;
    int max_iterations = 30;
    double convergence_px = 0.01;
    double max_mean_residual = 20.0;  // mean absolute photometric error gate
};

inline std::vector<Image8> build_pyramid(const Image8& img, int levels) {
    std::vector<Image8> pyr;
    pyr.reserve(levels);
    pyr.push_back(img);
    for (int l = 1; l < levels; ++l) pyr.push_back(half_size(pyr.back()));
    return pyr;
}

/// Tracks points from prev to curr by minimizing the photometric error of a
/// window patch, coarse to fine. Gradients are taken from the template patch
/// and held fixed per level (Bouguet-style KLT).
inline void track_photometric(const std::vector<Image8>& prev_pyr,
                              const std::vector<Image8>& curr_pyr,
                              const std::vector<Vec2>& points, std::vector<Vec2>& new_points,
                              std::vector<char>& status, const LkConfig& cfg = {}) {
    const int levels = static_cast<int>(prev_pyr.size());
    const int r = cfg.window / 2;
    new_points.assign(points.size(), Vec2::Zero());
    status.assign(points.size(), 0);

    const int npix = cfg.window * cfg.window;
    std::vector<double> tmpl(npix), gx(npix), gy(npix);

    for (size_t i = 0; i < points.size(); ++i) {
        Vec2 d = Vec2::Zero();  // displacement estimate at the current level
        bool ok = true;
        for (int l = levels - 1; l >= 0 && ok; --l) {
            const Image8& prev = prev_pyr[l];
            const Image8& curr = curr_pyr[l];
            const double scale = 1.0 / (1 << l);
            const Vec2 p = points[i] * scale;
            if (p.x() < r + 1 || p.y() < r + 1 || p.x() > prev.width() - r - 2 ||
                p.y() > prev.height() - r - 2) {
                if (l == 0) ok = false;  // margin violation at full resolution is fatal
                continue;
            }
            // template patch and its gradients, fixed for the level
            double gxx = 0, gyy = 0, gxy = 0;
            int idx = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx, ++idx) {
                    const double x = p.x() + dx, y = p.y() + dy;
                    tmpl[idx] = prev.sample_bilinear(x, y);
                    gx[idx] = 0.5 * (prev.sample_bilinear(x + 1, y) - prev.sample_bilinear(x - 1, y));
                    gy[idx] = 0.5 * (prev.sample_bilinear(x, y + 1) - prev.sample_bilinear(x, y - 1));
                    gxx += gx[idx] * gx[idx];
                    gyy += gy[idx] * gy[idx];
                    gxy += gx[idx] * gy[idx];
                }
            const double det = gxx * gyy - gxy * gxy;
            if (det < 1e-6 || gxx + gyy < 1e-3 * npix) {
                ok = false;
                break;
            }
            double residual = 0.0;
            for (int it = 0; it < cfg.max_iterations; ++it) {
                const Vec2 q = p + d;
                if (q.x() < r + 1 || q.y() < r + 1 || q.x() > curr.width() - r - 2 ||
                    q.y() > curr.height() - r - 2) {
                    ok = false;
                    break;
                }
                double bx = 0, by = 0;
                residual = 0.0;
                idx = 0;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx, ++idx) {
                        const double e = tmpl[idx] - curr.sample_bilinear(q.x() + dx, q.y() + dy);
                        bx += gx[idx] * e;
                        by += gy[idx] * e;
                        residual += std::abs(e);
                    }
                // solve the 2x2 normal equations; the template-gradient sign convention
                // makes the update additive in d
                const Vec2 step((gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det);
                d += step;
                if (step.norm() < cfg.convergence_px) break;
            }
            if (!ok) break;
            if (l == 0 && residual / npix > cfg.max_mean_residual) ok = false;
            if (l > 0) d *= 2.0;  // propagate to the next finer level
        }
        if (!ok) continue;
        const Vec2 np = points[i] + d;
        if (np.x() < r + 1 || np.y() < r + 1 || np.x() > curr_pyr[0].width() - r - 2 ||
            np.y() > curr_pyr[0].height() - r - 2)
            continue;
        new_points[i] = np;
        status[i] = 1;
    }
}

inline void track_photometric(const Image8& prev, const Image8& curr, const std::vector<Vec2>& points,
                              std::vector<Vec2>& new_points, std::vector<char>& status,
                              const LkConfig& cfg = {}) {
    track_photometric(build_pyramid(prev, cfg.pyramid_levels), build_pyramid(curr, cfg.pyramid_levels),
                      points, new_points, status, cfg);
}

// --- Normalized 8-point fundamental matrix inside RANSAC ---

struct RansacResult {
    Mat3 fundamental = Mat3::Zero();
    std::vector<char> inliers;
    int inlier_count = 0;
};

namespace epipolar_detail {

inline Mat3 normalize_points(const std::vector<Vec2>& pts, std::vector<Vec2>& out) {
    Vec2 centroid = Vec2::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - centroid).norm();
    mean_dist /= static_cast<double>(pts.size());
    const double s = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    out.resize(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) out[i] = s * (pts[i] - centroid);
    Mat3 T;
    T << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
    return T;
}

/// Least-squares F from >= 8 normalized correspondences, rank-2 enforced.
inline Mat3 solve_eight_point(const std::vector<Vec2>& prev_n, const std::vector<Vec2>& curr_n,
                              const std::vector<int>& idx) {
    Eigen::MatrixXd A(idx.size(), 9);
    for (size_t r = 0; r < idx.size(); ++r) {
        const Vec2& x = prev_n[idx[r]];
        const Vec2& xp = curr_n[idx[r]];
        A.row(r) << xp.x() * x.x(), xp.x() * x.y(), xp.x(), xp.y() * x.x(), xp.y() * x.y(), xp.y(),
            x.x(), x.y(), 1.0;
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const Eigen::VectorXd f = svd.matrixV().col(8);
    Mat3 F;
    F << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
    // rank-2 enforcement
    Eigen::JacobiSVD<Mat3> fsvd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vec3 sv = fsvd.singularValues();
    sv.z() = 0.0;
    return fsvd.matrixU() * sv.asDiagonal() * fsvd.matrixV().transpose();
}

/// Symmetric epipolar error: the larger of the two point-to-line distances.
inline double epipolar_error(const Mat3& F, const Vec2& prev, const Vec2& curr) {
    const Vec3 x(prev.x(), prev.y(), 1.0);
    const Vec3 xp(curr.x(), curr.y(), 1.0);
    const Vec3 l1 = F * x;        // line in the current image
    const Vec3 l2 = F.transpose() * xp;
    const double d1 = std::abs(xp.dot(l1)) / std::max(1e-12, std::hypot(l1.x(), l1.y()));
    const double d2 = std::abs(x.dot(l2)) / std::max(1e-12, std::hypot(l2.x(), l2.y()));
    return std::max(d1, d2);
}

}  // namespace epipolar_detail

/// Seeded RANSAC with the normalized 8-point solver; the best-consensus model is
/// refit on its inliers and the mask recomputed against the refit matrix.
inline RansacResult ransac_fundamental(const std::vector<Vec2>& prev_pts,
                                       const std::vector<Vec2>& curr_pts, double threshold_px,
                                       int iterations, uint64_t seed = 42) {
    if (prev_pts.size() != curr_pts.size())
        throw std::invalid_argument("ransac_fundamental: point count mismatch");
    const int n = static_cast<int>(prev_pts.size());
    if (n < 8) throw std::invalid_argument("ransac_fundamental: need at least 8 correspondences");

    std::vector<Vec2> prev_n, curr_n;
    const Mat3 Tp = epipolar_detail::normalize_points(prev_pts, prev_n);
    const Mat3 Tc = epipolar_detail::normalize_points(curr_pts, curr_n);

    Rng rng(seed);
    std::vector<int> sample(8);
    std::vector<int> best_inliers;
    int best_count = -1;

    auto count_inliers = [&](const Mat3& F_px, std::vector<int>* store) {
        int count = 0;
        for (int i = 0; i < n; ++i) {
            if (epipolar_detail::epipolar_error(F_px, prev_pts[i], curr_pts[i]) <= threshold_px) {
                ++count;
                if (store) store->push_back(i);
            }
        }
        return count;
    };

    for (int it = 0; it < iterations; ++it) {
        for (int k = 0; k < 8; ++k) {
            int pick;
            bool fresh;
            do {
                pick = static_cast<int>(rng.uniform_index(n));
                fresh = true;
                for (int j = 0; j < k; ++j)
                    if (sample[j] == pick) fresh = false;
            } while (!fresh);
            sample[k] = pick;
        }
        const Mat3 Fn = epipolar_detail::solve_eight_point(prev_n, curr_n, sample);
        const Mat3 F_px = Tc.transpose() * Fn * Tp;
        std::vector<int> inl;
        const int count = count_inliers(F_px, &inl);
        if (count > best_count) {
            best_count = count;
            best_inliers = std::move(inl);
        }
    }

    RansacResult result;
    result.inliers.assign(n, 0);
    if (best_count < 8) {
        // no usable consensus; report the empty model
        return result;
    }
    const Mat3 Fn = epipolar_detail::solve_eight_point(prev_n, curr_n, best_inliers);
    result.fundamental = Tc.transpose() * Fn * Tp;
    for (int i = 0; i < n; ++i) {
        if (epipolar_detail::epipolar_error(result.fundamental, prev_pts[i], curr_pts[i]) <=
            threshold_px) {
            result.inliers[i] = 1;
            ++result.inlier_count;
        }
    }
    return result;
}

// --- Frame-to-frame host front-end (detect + LK + RANSAC) ---

struct HostTrackerConfig {
    int target_points = 200;
    double quality_ratio = 0.01;
    double min_distance = 8.0;
    LkConfig lk;
    double ransac_threshold_px = 1.0;
    int ransac_iterations = 200;
    uint64_t ransac_seed = 42;
};

/// Produces per-frame flow vectors from images, mirroring a conventional
/// on-host front-end. Flow vectors carry hamming 0 and the Shi-Tomasi score
/// as cornerness so they rank by detection strength downstream.
class HostFrontEnd {
  public:
    explicit HostFrontEnd(const HostTrackerConfig& cfg = {}) : cfg_(cfg) {}

    std::vector<FlowVector> process(const Image8& frame) {
        auto pyr = build_pyramid(frame, cfg_.lk.pyramid_levels);
        std::vector<FlowVector> flow;
        if (!prev_pyr_.empty() && !points_.empty()) {
            std::vector<Vec2> moved;
            std::vector<char> status;
            track_photometric(prev_pyr_, pyr, points_, moved, status, cfg_.lk);

            std::vector<Vec2> prev_ok, curr_ok;
            std::vector<double> score_ok;
            for (size_t i = 0; i < points_.size(); ++i) {
                if (!status[i]) continue;
                prev_ok.push_back(points_[i]);
                curr_ok.push_back(moved[i]);
                score_ok.push_back(scores_[i]);
            }
            std::vector<char> keep(prev_ok.size(), 1);
            if (prev_ok.size() >= 8) {
                const auto ransac = ransac_fundamental(prev_ok, curr_ok, cfg_.ransac_threshold_px,
                                                       cfg_.ransac_iterations, cfg_.ransac_seed);
                if (ransac.inlier_count >= 8) keep = ransac.inliers;
            }
            std::vector<Vec2> survivors;
            std::vector<double> survivor_scores;
            for (size_t i = 0; i < prev_ok.size(); ++i) {
                if (!keep[i]) continue;
                FlowVector fv;
                fv.prev = prev_ok[i];
                fv.curr = curr_ok[i];
                fv.hamming = 0;
                fv.cornerness = score_ok[i];
                flow.push_back(fv);
                survivors.push_back(curr_ok[i]);
                survivor_scores.push_back(score_ok[i]);
            }
            points_ = std::move(survivors);
            scores_ = std::move(survivor_scores);
        }
        replenish(frame);
        prev_pyr_ = std::move(pyr);
        return flow;
    }

    void reset() {
        prev_pyr_.clear();
        points_.clear();
        scores_.clear();
    }

  private:
    void replenish(const Image8& frame) {
        if (static_cast<int>(points_.size()) >= cfg_.target_points) return;
        const auto corners =
            detect_shi_tomasi(frame, cfg_.target_points * 2, cfg_.quality_ratio, cfg_.min_distance);
        const double min_d2 = cfg_.min_distance * cfg_.min_distance;
        for (const auto& c : corners) {
            if (static_cast<int>(points_.size()) >= cfg_.target_points) break;
            bool clear = true;
            for (const auto& p : points_) {
                const double dx = c.x - p.x(), dy = c.y - p.y();
                if (dx * dx + dy * dy < min_d2) {
                    clear = false;
                    break;
                }
            }
            if (clear) {
                points_.emplace_back(c.x, c.y);
                scores_.push_back(c.shi_tomasi_score);
            }
        }
    }

    HostTrackerConfig cfg_;
    std::vector<Image8> prev_pyr_;
    std::vector<Vec2> points_;
    std::vector<double> scores_;
};

}  // namespace ofvio
