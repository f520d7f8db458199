#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "ofvio/geometry.hpp"
#include "ofvio/imu_preint.hpp"
#include "ofvio/tracker.hpp"
#include "ofvio/types.hpp"

namespace ofvio {

struct EstimatorConfig {
    int window_size = 10;
    int decimation = 2;             // estimator tick every Nth camera frame
    double huber_delta_px = 1.5;    // on the pixel-equivalent tangent residual
    double reproj_sigma_px = 1.0;
    double min_parallax_deg = 0.5;  // triangulation gate
    int max_iterations = 50;
    double gradient_tol = 1e-8;
    double step_tol = 1e-10;
    double min_inverse_depth = 1e-8;
    PreintOptions preint;
};

// --- Residual functions (analytic Jacobians, verified against finite differences) ---

/// Tangent-plane reprojection residual of an inverse-depth landmark, in
/// pixel-equivalent units (focal * tangent error). Pose Jacobian columns are
/// ordered [d/d_p (3), d/d_theta (3)] with right quaternion perturbations.
/// Returns false when the predicted point collapses onto the camera center.
inline bool reprojection_residual(const Pose& T_wb_anchor, const Pose& T_wb_obs, const Pose& T_bc,
                                  const Vec3& unit_anchor, double inv_depth, const Vec3& unit_obs,
                                  double focal, Vec2* residual,
                                  Eigen::Matrix<double, 2, 6>* J_anchor = nullptr,
                                  Eigen::Matrix<double, 2, 6>* J_obs = nullptr,
                                  Vec2* J_depth = nullptr) {
    const double depth = 1.0 / inv_depth;
    const Mat3 R_a = T_wb_anchor.q.toRotationMatrix();
    const Mat3 R_j = T_wb_obs.q.toRotationMatrix();
    const Mat3 R_bc = T_bc.q.toRotationMatrix();

    const Vec3 m_anchor = R_bc * (unit_anchor * depth) + T_bc.p;  // point in anchor body frame
    const Vec3 p_world = R_a * m_anchor + T_wb_anchor.p;
    const Vec3 x_body = R_j.transpose() * (p_world - T_wb_obs.p);
    const Vec3 x_cam = R_bc.transpose() * (x_body - T_bc.p);

    const double norm = x_cam.norm();
    if (norm < 1e-9) return false;
    const Vec3 dir = x_cam / norm;
    const Eigen::Matrix<double, 2, 3> tangent = tangent_basis(unit_obs);
    *residual = focal * (tangent * (dir - unit_obs));

    if (J_anchor || J_obs || J_depth) {
        // d(residual)/d(x_cam) through the normalization
        const Eigen::Matrix<double, 2, 3> dr_dx =
            focal * tangent * (Mat3::Identity() - dir * dir.transpose()) / norm;
        const Mat3 RbcT_RjT = R_bc.transpose() * R_j.transpose();
        if (J_anchor) {
            J_anchor->block<2, 3>(0, 0) = dr_dx * RbcT_RjT;
            J_anchor->block<2, 3>(0, 3) = dr_dx * RbcT_RjT * (-R_a * skew(m_anchor));
        }
        if (J_obs) {
            J_obs->block<2, 3>(0, 0) = -dr_dx * RbcT_RjT;
            J_obs->block<2, 3>(0, 3) = dr_dx * R_bc.transpose() * skew(x_body);
        }
        if (J_depth)
            *J_depth = dr_dx * (RbcT_RjT * R_a * R_bc * unit_anchor) * (-depth * depth);
    }
    return true;
}

/// Preintegration residual [r_R, r_v, r_p] between window states i and j,
/// whitened by the caller. Jacobian columns per state: [d_p, d_theta, d_v].
inline void preintegration_residual(const NavState& si, const NavState& sj, const PreintDelta& delta,
                                    const Vec3& gravity, Eigen::Matrix<double, 9, 1>* residual,
                                    Eigen::Matrix<double, 9, 9>* J_i = nullptr,
                                    Eigen::Matrix<double, 9, 9>* J_j = nullptr) {
    const double dt = delta.dt;
    const Mat3 R_i_T = si.q.conjugate().toRotationMatrix();
    const Quat q_err = (delta.delta_q.conjugate() * si.q.conjugate() * sj.q).normalized();
    const Vec3 r_R = quat_log(q_err);
    const Vec3 v_term = sj.v - si.v - gravity * dt;
    const Vec3 p_term = sj.p - si.p - si.v * dt - 0.5 * gravity * dt * dt;
    const Vec3 r_v = R_i_T * v_term - delta.delta_v;
    const Vec3 r_p = R_i_T * p_term - delta.delta_p;
    residual->segment<3>(0) = r_R;
    residual->segment<3>(3) = r_v;
    residual->segment<3>(6) = r_p;

    if (J_i) {
        J_i->setZero();
        const Mat3 dR = delta.delta_q.toRotationMatrix();
        J_i->block<3, 3>(0, 3) = -left_jacobian_inv(r_R) * dR.transpose();
        J_i->block<3, 3>(3, 3) = skew(R_i_T * v_term);
        J_i->block<3, 3>(3, 6) = -R_i_T;
        J_i->block<3, 3>(6, 0) = -R_i_T;
        J_i->block<3, 3>(6, 3) = skew(R_i_T * p_term);
        J_i->block<3, 3>(6, 6) = -R_i_T * dt;
    }
    if (J_j) {
        J_j->setZero();
        J_j->block<3, 3>(0, 3) = right_jacobian_inv(r_R);
        J_j->block<3, 3>(3, 6) = R_i_T;
        J_j->block<3, 3>(6, 0) = R_i_T;
    }
}

/// Linear least-squares triangulation over all observing camera poses.
/// Returns the inverse depth along the first observation's ray, or nullopt when
/// the maximum pairwise ray angle is below the parallax threshold.
inline std::optional<double> triangulate_inverse_depth(
    const std::vector<std::pair<Pose, Vec3>>& camera_obs, double min_parallax_rad) {
    if (camera_obs.size() < 2) return std::nullopt;

    double max_angle = 0.0;
    std::vector<Vec3> world_rays;
    world_rays.reserve(camera_obs.size());
    for (const auto& [T_wc, u] : camera_obs) world_rays.push_back(T_wc.q * u);
    for (size_t i = 0; i < world_rays.size(); ++i)
        for (size_t j = i + 1; j < world_rays.size(); ++j) {
            const double c = std::clamp(world_rays[i].dot(world_rays[j]), -1.0, 1.0);
            max_angle = std::max(max_angle, std::acos(c));
        }
    if (max_angle < min_parallax_rad) return std::nullopt;

    Mat3 A = Mat3::Zero();
    Vec3 b = Vec3::Zero();
    for (const auto& [T_wc, u] : camera_obs) {
        const Mat3 R_cw = T_wc.q.conjugate().toRotationMatrix();
        const Mat3 S = skew(u) * R_cw;
        A += S.transpose() * S;
        const Vec3 rhs = skew(u) * (R_cw * T_wc.p);
        b += S.transpose() * rhs;
    }
    const Vec3 point = A.ldlt().solve(b);
    const Vec3 x_anchor = camera_obs.front().first.inverse_transform(point);
    if (x_anchor.dot(camera_obs.front().second) <= 0.0) return std::nullopt;  // behind the camera
    const double depth = x_anchor.norm();
    if (!(depth > 1e-6) || !std::isfinite(depth)) return std::nullopt;
    return 1.0 / depth;
}

// --- Sliding window ---

struct WindowFrame {
    int64_t frame_id = 0;
    double t = 0.0;
    NavState nav;
};

struct LandmarkState {
    int64_t anchor_frame_id = 0;
    double inv_depth = 0.0;
};

struct WindowObservation {
    Vec3 unit = Vec3::UnitZ();
    Vec2 pixel = Vec2::Zero();
};

struct OptimizeReport {
    double initial_cost = 0.0;
    double final_cost = 0.0;
    int iterations = 0;
    int accepted_steps = 0;
    bool converged = false;
    bool cost_monotone = true;
    int landmarks = 0;
    int reprojection_factors = 0;
};

/// Sliding-window visual-inertial state: poses, velocities, inverse-depth
/// landmarks and the preintegration factors linking consecutive frames.
///
/// The oldest frame's pose is held fixed as the gauge; sliding discards its
/// information without a marginalization prior. The bias is constant during
/// optimization; set_bias() re-integrates every stored interval instead of
/// tracking bias Jacobians.
class SlidingWindow {
  public:
    SlidingWindow(const EstimatorConfig& cfg, const SequenceManifest& manifest)
        : cfg_(cfg), manifest_(manifest), T_bc_(manifest.body_from_camera()) {
        focal_ = 0.5 * (manifest.camera.fx + manifest.camera.fy);
    }

    const std::vector<WindowFrame>& frames() const { return frames_; }
    std::vector<WindowFrame>& frames() { return frames_; }
    const std::map<int64_t, LandmarkState>& landmarks() const { return landmarks_; }
    std::map<int64_t, LandmarkState>& landmarks() { return landmarks_; }
    const std::map<int64_t, std::map<int64_t, WindowObservation>>& observations() const {
        return observations_;
    }
    const ImuBias& bias() const { return bias_; }
    const Pose& body_from_camera() const { return T_bc_; }
    double focal() const { return focal_; }

    bool full() const { return static_cast<int>(frames_.size()) >= cfg_.window_size; }

    void add_frame(const WindowFrame& frame, const PreintDelta& delta,
                   std::vector<ImuSample> interval_samples) {
        if (!frames_.empty()) {
            preints_.push_back(delta);
            preint_samples_.push_back(std::move(interval_samples));
        }
        frames_.push_back(frame);
    }

    void add_observations(int64_t frame_id, const std::vector<FeatureFrameEntry>& entries) {
        for (const auto& e : entries) observations_[e.track_id][frame_id] = {e.unit, e.pixel};
    }

    /// Triangulates tracks with enough in-window observations and parallax.
    /// Low-parallax tracks are deferred, not errored.
    void triangulate_new_landmarks() {
        for (const auto& [track_id, obs] : observations_) {
            if (landmarks_.count(track_id) || obs.size() < 2) continue;
            std::vector<std::pair<Pose, Vec3>> camera_obs;
            for (const auto& [frame_id, o] : obs) {
                const WindowFrame* f = find_frame(frame_id);
                if (!f) continue;
                camera_obs.emplace_back(camera_pose(f->nav), o.unit);
            }
            if (camera_obs.size() < 2) continue;
            const auto inv_depth =
                triangulate_inverse_depth(camera_obs, cfg_.min_parallax_deg * M_PI / 180.0);
            if (!inv_depth) continue;
            landmarks_[track_id] = {obs.begin()->first, *inv_depth};
        }
    }

    OptimizeReport optimize();

    /// Drops the oldest frame. Landmarks anchored there are re-anchored to their
    /// next observing frame (exact inverse-depth transform) or dropped.
    void slide() {
        if (frames_.empty()) return;
        const int64_t old_id = frames_.front().frame_id;

        std::vector<int64_t> dead;
        for (auto& [track_id, lm] : landmarks_) {
            if (lm.anchor_frame_id != old_id) continue;
            auto& obs = observations_[track_id];
            const Vec3 p_world = landmark_world(track_id, lm);
            bool moved = false;
            for (const auto& [frame_id, o] : obs) {
                if (frame_id == old_id) continue;
                const WindowFrame* f = find_frame(frame_id);
                if (!f) continue;
                const Vec3 x_cam = camera_pose(f->nav).inverse_transform(p_world);
                const double depth = x_cam.norm();
                if (!(depth > 1e-6) || x_cam.dot(o.unit) <= 0.0) break;
                lm.anchor_frame_id = frame_id;
                lm.inv_depth = 1.0 / depth;
                moved = true;
                break;
            }
            if (!moved) dead.push_back(track_id);
        }
        for (int64_t id : dead) landmarks_.erase(id);

        for (auto it = observations_.begin(); it != observations_.end();) {
            it->second.erase(old_id);
            if (it->second.empty()) {
                landmarks_.erase(it->first);
                it = observations_.erase(it);
            } else {
                ++it;
            }
        }
        // landmarks need two in-window observations to stay constrained
        for (auto it = landmarks_.begin(); it != landmarks_.end();) {
            if (observations_[it->first].size() < 2) it = landmarks_.erase(it);
            else ++it;
        }

        frames_.erase(frames_.begin());
        if (!preints_.empty()) {
            preints_.erase(preints_.begin());
            preint_samples_.erase(preint_samples_.begin());
        }
    }

    /// Re-integrates every stored interval with the new bias.
    void set_bias(const ImuBias& bias) {
        bias_ = bias;
        for (size_t i = 0; i < preints_.size(); ++i)
            preints_[i] = integrate(preint_samples_[i], bias_, cfg_.preint);
    }

    Pose camera_pose(const NavState& nav) const { return Pose(nav.p, nav.q).compose(T_bc_); }

    Vec3 landmark_world(int64_t track_id, const LandmarkState& lm) const {
        const WindowFrame* anchor = find_frame(lm.anchor_frame_id);
        if (!anchor) throw std::runtime_error("landmark_world: anchor frame left the window");
        const auto& obs = observations_.at(track_id).at(lm.anchor_frame_id);
        const Pose T_wc = camera_pose(anchor->nav);
        return T_wc.transform(obs.unit / lm.inv_depth);
    }

    const WindowFrame* find_frame(int64_t frame_id) const {
        for (const auto& f : frames_)
            if (f.frame_id == frame_id) return &f;
        return nullptr;
    }

    const std::vector<PreintDelta>& preints() const { return preints_; }
    std::vector<PreintDelta>& preints() { return preints_; }
    const EstimatorConfig& config() const { return cfg_; }
    const SequenceManifest& manifest() const { return manifest_; }

  private:
    friend class WindowProblem;

    EstimatorConfig cfg_;
    SequenceManifest manifest_;
    Pose T_bc_;
    double focal_ = 0.0;
    ImuBias bias_;
    std::vector<WindowFrame> frames_;
    std::vector<PreintDelta> preints_;               // between consecutive frames
    std::vector<std::vector<ImuSample>> preint_samples_;
    std::map<int64_t, LandmarkState> landmarks_;
    std::map<int64_t, std::map<int64_t, WindowObservation>> observations_;
};

// --- Levenberg-Marquardt on the window ---

namespace estimator_detail {

struct ReprojFactorRef {
    int64_t track_id;
    int anchor_idx;  // window frame index
    int obs_idx;
};

inline double huber_weight(double norm, double delta) {
    if (norm <= delta) return 1.0;
    return std::sqrt(delta * (2.0 * norm - delta)) / norm;
}

}  // namespace estimator_detail

class WindowProblem {
  public:
    explicit WindowProblem(SlidingWindow& window) : w_(window) {
        const int n_frames = static_cast<int>(w_.frames_.size());
        // frame 0 pose is the gauge: only its velocity is free
        frame_offset_.assign(n_frames, 0);
        frame_offset_[0] = 0;
        int offset = 3;
        for (int i = 1; i < n_frames; ++i) {
            frame_offset_[i] = offset;
            offset += 9;
        }
        for (const auto& [track_id, lm] : w_.landmarks_) {
            if (w_.observations_.at(track_id).size() < 2) continue;
            if (!w_.find_frame(lm.anchor_frame_id)) continue;
            landmark_offset_[track_id] = offset++;
        }
        n_vars_ = offset;

        for (const auto& [track_id, lm] : w_.landmarks_) {
            if (!landmark_offset_.count(track_id)) continue;
            const int anchor_idx = frame_index(lm.anchor_frame_id);
            for (const auto& [frame_id, obs] : w_.observations_.at(track_id)) {
                if (frame_id == lm.anchor_frame_id) continue;  // residual identically zero
                const int obs_idx = frame_index(frame_id);
                if (obs_idx < 0 || anchor_idx < 0) continue;
                factors_.push_back({track_id, anchor_idx, obs_idx});
            }
        }

        // sqrt information of each preintegration factor
        sqrt_info_.reserve(w_.preints_.size());
        for (const auto& d : w_.preints_) {
            Eigen::Matrix<double, 9, 9> cov = d.cov;
            cov.diagonal().array() += 1e-16;
            const Eigen::LLT<Eigen::Matrix<double, 9, 9>> llt(cov);
            sqrt_info_.push_back(
                llt.matrixL().solve(Eigen::Matrix<double, 9, 9>::Identity()));
        }
    }

    int n_vars() const { return n_vars_; }
    int n_reprojection_factors() const { return static_cast<int>(factors_.size()); }
    int n_landmarks() const { return static_cast<int>(landmark_offset_.size()); }

    struct State {
        std::vector<NavState> navs;
        std::map<int64_t, double> inv_depths;
    };

    State capture() const {
        State s;
        for (const auto& f : w_.frames_) s.navs.push_back(f.nav);
        for (const auto& [id, off] : landmark_offset_) s.inv_depths[id] = w_.landmarks_.at(id).inv_depth;
        return s;
    }

    void restore(const State& s) {
        for (size_t i = 0; i < w_.frames_.size(); ++i) w_.frames_[i].nav = s.navs[i];
        for (const auto& [id, d] : s.inv_depths) w_.landmarks_.at(id).inv_depth = d;
    }

    State apply_step(const State& s, const Eigen::VectorXd& dx) const {
        State out = s;
        out.navs[0].v += dx.segment<3>(0);
        for (size_t i = 1; i < out.navs.size(); ++i) {
            const int off = frame_offset_[i];
            out.navs[i].p += dx.segment<3>(off);
            out.navs[i].q = (out.navs[i].q * quat_exp(dx.segment<3>(off + 3))).normalized();
            out.navs[i].v += dx.segment<3>(off + 6);
        }
        for (auto& [id, depth] : out.inv_depths)
            depth = std::max(w_.cfg_.min_inverse_depth, depth + dx(landmark_offset_.at(id)));
        return out;
    }

    /// Robust cost; accumulates the normal equations when H and b are given.
    double evaluate(const State& s, Eigen::MatrixXd* H, Eigen::VectorXd* b) const {
        if (H) {
            H->setZero(n_vars_, n_vars_);
            b->setZero(n_vars_);
        }
        double cost = 0.0;
        const double inv_sigma = 1.0 / w_.cfg_.reproj_sigma_px;

        for (const auto& f : factors_) {
            const NavState& anchor = s.navs[f.anchor_idx];
            const NavState& obs_nav = s.navs[f.obs_idx];
            const auto& anchor_obs =
                w_.observations_.at(f.track_id).at(w_.frames_[f.anchor_idx].frame_id);
            const auto& target_obs =
                w_.observations_.at(f.track_id).at(w_.frames_[f.obs_idx].frame_id);
            Vec2 r;
            Eigen::Matrix<double, 2, 6> Ja, Jo;
            Vec2 Jd;
            const bool ok = reprojection_residual(
                Pose(anchor.p, anchor.q), Pose(obs_nav.p, obs_nav.q), w_.T_bc_, anchor_obs.unit,
                s.inv_depths.at(f.track_id), target_obs.unit, w_.focal_, &r, H ? &Ja : nullptr,
                H ? &Jo : nullptr, H ? &Jd : nullptr);
            if (!ok) continue;
            if (!r.allFinite())
                throw std::runtime_error("optimize_window: non-finite reprojection residual, track " +
                                         std::to_string(f.track_id) + " at frame " +
                                         std::to_string(w_.frames_[f.obs_idx].frame_id));
            const double weight =
                estimator_detail::huber_weight(r.norm(), w_.cfg_.huber_delta_px) * inv_sigma;
            cost += (weight * r).squaredNorm();
            if (!H) continue;

            // scatter the weighted blocks: anchor pose, observer pose, inverse depth
            const Vec2 rw = weight * r;
            std::vector<std::pair<int, Eigen::Matrix<double, 2, 3>>> blocks;
            if (f.anchor_idx != 0) {
                blocks.emplace_back(frame_offset_[f.anchor_idx], weight * Ja.block<2, 3>(0, 0));
                blocks.emplace_back(frame_offset_[f.anchor_idx] + 3, weight * Ja.block<2, 3>(0, 3));
            }
            if (f.obs_idx != 0) {
                blocks.emplace_back(frame_offset_[f.obs_idx], weight * Jo.block<2, 3>(0, 0));
                blocks.emplace_back(frame_offset_[f.obs_idx] + 3, weight * Jo.block<2, 3>(0, 3));
            }
            const int d_off = landmark_offset_.at(f.track_id);
            const Vec2 Jdw = weight * Jd;
            for (const auto& [off_a, Ba] : blocks) {
                for (const auto& [off_b, Bb] : blocks)
                    H->block<3, 3>(off_a, off_b) += Ba.transpose() * Bb;
                H->block<3, 1>(off_a, d_off) += Ba.transpose() * Jdw;
                H->block<1, 3>(d_off, off_a) += Jdw.transpose() * Ba;
                b->segment<3>(off_a) += Ba.transpose() * rw;
            }
            (*H)(d_off, d_off) += Jdw.squaredNorm();
            (*b)(d_off) += Jdw.dot(rw);
        }

        const Vec3 gravity = w_.manifest_.gravity_vector();
        for (size_t k = 0; k < w_.preints_.size(); ++k) {
            Eigen::Matrix<double, 9, 1> r;
            Eigen::Matrix<double, 9, 9> Ji, Jj;
            preintegration_residual(s.navs[k], s.navs[k + 1], w_.preints_[k], gravity, &r,
                                    H ? &Ji : nullptr, H ? &Jj : nullptr);
            if (!r.allFinite())
                throw std::runtime_error("optimize_window: non-finite preintegration residual between " +
                                         std::to_string(w_.frames_[k].frame_id) + " and " +
                                         std::to_string(w_.frames_[k + 1].frame_id));
            const Eigen::Matrix<double, 9, 1> rw = sqrt_info_[k] * r;
            cost += rw.squaredNorm();
            if (!H) continue;
            const Eigen::Matrix<double, 9, 9> Jiw = sqrt_info_[k] * Ji;
            const Eigen::Matrix<double, 9, 9> Jjw = sqrt_info_[k] * Jj;

            // column selections: frame 0 exposes only velocity
            const auto cols_for = [&](size_t fi, const Eigen::Matrix<double, 9, 9>& J)
                -> std::pair<Eigen::MatrixXd, int> {
                if (fi == 0) return {J.middleCols<3>(6), frame_offset_[0]};  // velocity block
                return {J, frame_offset_[fi]};
            };
            const auto [Ja_m, off_a] = cols_for(k, Jiw);
            const auto [Jb_m, off_b] = cols_for(k + 1, Jjw);
            H->block(off_a, off_a, Ja_m.cols(), Ja_m.cols()) += Ja_m.transpose() * Ja_m;
            H->block(off_b, off_b, Jb_m.cols(), Jb_m.cols()) += Jb_m.transpose() * Jb_m;
            H->block(off_a, off_b, Ja_m.cols(), Jb_m.cols()) += Ja_m.transpose() * Jb_m;
            H->block(off_b, off_a, Jb_m.cols(), Ja_m.cols()) += Jb_m.transpose() * Ja_m;
            b->segment(off_a, Ja_m.cols()) += Ja_m.transpose() * rw;
            b->segment(off_b, Jb_m.cols()) += Jb_m.transpose() * rw;
        }
        return cost;
    }

  private:
    int frame_index(int64_t frame_id) const {
        for (size_t i = 0; i < w_.frames_.size(); ++i)
            if (w_.frames_[i].frame_id == frame_id) return static_cast<int>(i);
        return -1;
    }

    SlidingWindow& w_;
    std::vector<int> frame_offset_;
    std::map<int64_t, int> landmark_offset_;
    std::vector<estimator_detail::ReprojFactorRef> factors_;
    std::vector<Eigen::Matrix<double, 9, 9>> sqrt_info_;
    int n_vars_ = 0;
};

inline OptimizeReport SlidingWindow::optimize() {
    OptimizeReport report;
    if (frames_.size() < 2 || landmarks_.empty()) return report;
    WindowProblem problem(*this);
    report.landmarks = problem.n_landmarks();
    report.reprojection_factors = problem.n_reprojection_factors();
    if (problem.n_landmarks() == 0) return report;

    WindowProblem::State state = problem.capture();
    Eigen::MatrixXd H;
    Eigen::VectorXd b;
    double cost = problem.evaluate(state, &H, &b);
    report.initial_cost = cost;
    if (!std::isfinite(cost)) throw std::runtime_error("optimize_window: non-finite cost at entry");

    double lambda = 1e-4;
    for (int it = 0; it < cfg_.max_iterations; ++it) {
        ++report.iterations;
        if (b.lpNorm<Eigen::Infinity>() < cfg_.gradient_tol) {
            report.converged = true;
            break;
        }
        Eigen::MatrixXd H_damped = H;
        for (int i = 0; i < H.rows(); ++i)
            H_damped(i, i) += lambda * std::max(H(i, i), 1e-12);
        const Eigen::VectorXd dx = H_damped.ldlt().solve(-b);
        if (!dx.allFinite()) {
            lambda *= 10.0;
            continue;
        }
        if (dx.norm() < cfg_.step_tol) {
            report.converged = true;
            break;
        }
        const WindowProblem::State candidate = problem.apply_step(state, dx);
        const double new_cost = problem.evaluate(candidate, nullptr, nullptr);
        if (std::isfinite(new_cost) && new_cost < cost) {
            state = candidate;
            cost = new_cost;
            ++report.accepted_steps;
            lambda = std::max(lambda / 3.0, 1e-12);
            problem.evaluate(state, &H, &b);
        } else {
            lambda *= 4.0;
            if (lambda > 1e12) break;
        }
    }
    problem.restore(state);
    report.final_cost = cost;
    return report;
}

}  // namespace ofvio
