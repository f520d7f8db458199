#include <gtest/gtest.h>

#include "ofvio/estimator.hpp"
#include "ofvio/odometry.hpp"
#include "ofvio/synth.hpp"
#include "support/oracles.hpp"

using namespace ofvio;

namespace {

Pose random_pose(Rng& rng, double pos_scale = 1.0) {
    return Pose(Vec3(rng.normal(0, pos_scale), rng.normal(0, pos_scale), rng.normal(0, pos_scale)),
                quat_exp(Vec3(rng.normal(0, 0.5), rng.normal(0, 0.5), rng.normal(0, 0.5))));
}

/// Synthetic sliding-window fixture: circle trajectory, wall landmarks, exact
/// unit-sphere observations and state-consistent preintegration factors. Its
/// global optimum is exactly the ground truth.
struct WindowFixture {
    SequenceManifest manifest;
    EstimatorConfig config;
    std::shared_ptr<PlanarTrajectory> trajectory;
    std::vector<Vec3> points;
    std::vector<NavState> gt_states;
    SlidingWindow window;

    explicit WindowFixture(int n_frames = 6, int n_points = 40, bool identity_extrinsics = false,
                           uint64_t seed = 3)
        : manifest(make_fixture_manifest(identity_extrinsics)),
          config(make_config()),
          trajectory(std::make_shared<PlanarTrajectory>(
              std::make_shared<CirclePath>(Vec3(0, 0, 1.5), 1.5, 2.0 * M_PI / 15.0, 0.0, 0.15, 7.0),
              0.0, 2.0 * M_PI / 15.0)),
          window(config, manifest) {
        Rng rng(seed);
        for (int i = 0; i < n_points; ++i) {
            const double az = rng.uniform(-0.9, 0.9);
            points.emplace_back(6.0 * std::cos(az), 6.0 * std::sin(az), rng.uniform(0.5, 3.0));
        }
        const Vec3 gravity = manifest.gravity_vector();
        for (int k = 0; k < n_frames; ++k) {
            const double t = 0.1 * k;
            NavState nav;
            nav.p = trajectory->pose(t).p;
            nav.q = trajectory->pose(t).q;
            nav.v = trajectory->velocity_world(t);
            gt_states.push_back(nav);

            WindowFrame frame;
            frame.frame_id = k;
            frame.t = t;
            frame.nav = nav;
            PreintDelta delta;
            if (k > 0)
                delta = oracle::delta_from_states(gt_states[k - 1], nav, 0.1, gravity, 1e-8);
            window.add_frame(frame, delta, {});

            std::vector<FeatureFrameEntry> entries;
            const Pose cam = Pose(nav.p, nav.q).compose(manifest.body_from_camera());
            for (size_t i = 0; i < points.size(); ++i) {
                const Vec3 x_c = cam.inverse_transform(points[i]);
                if (x_c.z() < 0.3) continue;
                FeatureFrameEntry e;
                e.track_id = static_cast<int64_t>(i);
                e.unit = x_c.normalized();
                e.pixel = Vec2(0, 0);  // pixels unused by the optimizer
                entries.push_back(e);
            }
            window.add_observations(k, entries);
        }
        // exact inverse depths in each landmark's anchor frame
        for (const auto& [track_id, obs] : window.observations()) {
            if (obs.size() < 2) continue;
            const int64_t anchor_id = obs.begin()->first;
            const WindowFrame* anchor = window.find_frame(anchor_id);
            const Vec3 x_c = window.camera_pose(anchor->nav).inverse_transform(points[track_id]);
            window.landmarks()[track_id] = {anchor_id, 1.0 / x_c.norm()};
        }
    }

    static SequenceManifest make_fixture_manifest(bool identity_extrinsics) {
        SequenceManifest m = make_default_manifest(320, 240, 10.0, 1000.0);
        m.camera.k1 = m.camera.k2 = m.camera.p1 = m.camera.p2 = 0.0;
        if (identity_extrinsics) {
            m.q_bc = camera_forward_extrinsics();
            m.p_bc = Vec3::Zero();
        }
        return m;
    }

    static EstimatorConfig make_config() {
        EstimatorConfig cfg;
        cfg.window_size = 10;
        return cfg;
    }

    void perturb(double pos_m, double angle_rad, double depth_rel, uint64_t seed) {
        Rng rng(seed);
        auto& frames = window.frames();
        for (size_t k = 1; k < frames.size(); ++k) {  // frame 0 is the gauge
            Vec3 dp(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1));
            frames[k].nav.p += dp.normalized() * pos_m;
            Vec3 axis(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1));
            frames[k].nav.q = (frames[k].nav.q * quat_exp(axis.normalized() * angle_rad)).normalized();
            frames[k].nav.v += 0.2 * pos_m * Vec3(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1));
        }
        for (auto& [id, lm] : window.landmarks())
            lm.inv_depth *= 1.0 + depth_rel * rng.uniform(-1.0, 1.0);
    }

    double max_position_error() const {
        double worst = 0.0;
        for (size_t k = 0; k < window.frames().size(); ++k)
            worst = std::max(worst, (window.frames()[k].nav.p - gt_states[k].p).norm());
        return worst;
    }
    double max_angle_error_deg() const {
        double worst = 0.0;
        for (size_t k = 0; k < window.frames().size(); ++k)
            worst = std::max(worst,
                             rotation_angle(window.frames()[k].nav.q, gt_states[k].q) * 180.0 / M_PI);
        return worst;
    }
};

}  // namespace

// --- triangulate_inverse_depth ---

TEST(Triangulate, ExactPointOnAxis) {
    const Pose cam_a(Vec3(0, 0, 0), Quat::Identity());
    const Pose cam_b(Vec3(0.5, 0, 0), Quat::Identity());
    const Vec3 point(0, 0, 5);
    const Vec3 u_a = cam_a.inverse_transform(point).normalized();
    const Vec3 u_b = cam_b.inverse_transform(point).normalized();
    const auto inv = triangulate_inverse_depth({{cam_a, u_a}, {cam_b, u_b}}, 0.5 * M_PI / 180.0);
    ASSERT_TRUE(inv.has_value());
    EXPECT_NEAR(*inv, 0.2, 1e-9);
}

TEST(Triangulate, ZeroBaselineDeferred) {
    const Pose cam_a(Vec3(1, 2, 0), Quat::Identity());
    const Pose cam_b(Vec3(1, 2, 0), quat_exp(Vec3(0, 0.05, 0)));  // pure rotation
    const Vec3 point(0.5, -0.2, 6);
    const Vec3 u_a = cam_a.inverse_transform(point).normalized();
    const Vec3 u_b = cam_b.inverse_transform(point).normalized();
    EXPECT_FALSE(triangulate_inverse_depth({{cam_a, u_a}, {cam_b, u_b}}, 0.5 * M_PI / 180.0)
                     .has_value());
}

TEST(Triangulate, NoisyMonteCarlo) {
    const double fx = 300.0;
    const Vec3 point(0.4, -0.3, 5.0);
    int within = 0;
    double rel_sum = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(500 + trial);
        std::vector<std::pair<Pose, Vec3>> obs;
        for (int k = 0; k < 6; ++k) {
            const Pose cam(Vec3(0.2 * k, 0.03 * k, 0), quat_exp(Vec3(0, 0.01 * k, 0)));
            Vec3 x_c = cam.inverse_transform(point);
            // sigma = 0.5 px of pixel noise at focal length fx
            Vec2 px(fx * x_c.x() / x_c.z(), fx * x_c.y() / x_c.z());
            px += Vec2(rng.normal(0, 0.5), rng.normal(0, 0.5));
            obs.emplace_back(cam, Vec3(px.x() / fx, px.y() / fx, 1.0).normalized());
        }
        const auto inv = triangulate_inverse_depth(obs, 0.5 * M_PI / 180.0);
        ASSERT_TRUE(inv.has_value());
        const double truth = 1.0 / point.norm();
        const double rel = std::abs(*inv - truth) / truth;
        rel_sum += rel;
        if (rel < 0.05) ++within;
    }
    EXPECT_EQ(within, 100) << "every trial should stay within 5%";
    EXPECT_LT(rel_sum / 100.0, 0.02);
}

// --- analytic Jacobians vs central finite differences ---

TEST(Jacobians, ReprojectionMatchesFiniteDifference) {
    Rng rng(41);
    const double h = 1e-6;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Pose anchor = random_pose(rng);
        Pose obs_pose = random_pose(rng);
        const Pose T_bc(Vec3(rng.normal(0, 0.05), rng.normal(0, 0.05), rng.normal(0, 0.05)),
                        quat_exp(Vec3(rng.normal(0, 0.3), rng.normal(0, 0.3), rng.normal(0, 0.3))));
        // a world point in front of the anchor camera
        const Vec3 u_a = Vec3(rng.normal(0, 0.3), rng.normal(0, 0.3), 1.0).normalized();
        const double depth = rng.uniform(2.0, 10.0);
        const Pose cam_a = anchor.compose(T_bc);
        const Vec3 p_world = cam_a.transform(u_a * depth);
        // keep the point roughly in front of the observer too
        obs_pose.p = anchor.p + Vec3(rng.normal(0, 0.3), rng.normal(0, 0.3), rng.normal(0, 0.3));
        const Vec3 x_obs = obs_pose.compose(T_bc).inverse_transform(p_world);
        if (x_obs.norm() < 0.5) continue;
        // observation direction deliberately off the prediction: nonzero residual
        const Vec3 u_obs =
            (x_obs.normalized() + 0.02 * Vec3(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)))
                .normalized();
        const double inv_depth = 1.0 / depth;
        const double focal = 250.0;

        Vec2 r0;
        Eigen::Matrix<double, 2, 6> Ja, Jo;
        Vec2 Jd;
        ASSERT_TRUE(reprojection_residual(anchor, obs_pose, T_bc, u_a, inv_depth, u_obs, focal, &r0,
                                          &Ja, &Jo, &Jd));

        auto eval_perturbed = [&](const Pose& a, const Pose& o, double id) {
            Vec2 r;
            EXPECT_TRUE(reprojection_residual(a, o, T_bc, u_a, id, u_obs, focal, &r));
            return r;
        };
        auto check = [&](const Vec2& fd, const Vec2& an) {
            const double scale = std::max(1.0, an.norm());
            worst = std::max(worst, (fd - an).norm() / scale);
        };

        for (int k = 0; k < 3; ++k) {
            Vec3 d = Vec3::Zero();
            d(k) = h;
            // anchor position and orientation
            Pose ap = anchor, am = anchor;
            ap.p += d;
            am.p -= d;
            check((eval_perturbed(ap, obs_pose, inv_depth) - eval_perturbed(am, obs_pose, inv_depth)) /
                      (2 * h),
                  Ja.block<2, 1>(0, k));
            Pose aqp = anchor, aqm = anchor;
            aqp.q = (anchor.q * quat_exp(d)).normalized();
            aqm.q = (anchor.q * quat_exp(-d)).normalized();
            check((eval_perturbed(aqp, obs_pose, inv_depth) -
                   eval_perturbed(aqm, obs_pose, inv_depth)) /
                      (2 * h),
                  Ja.block<2, 1>(0, 3 + k));
            // observer position and orientation
            Pose op = obs_pose, om = obs_pose;
            op.p += d;
            om.p -= d;
            check((eval_perturbed(anchor, op, inv_depth) - eval_perturbed(anchor, om, inv_depth)) /
                      (2 * h),
                  Jo.block<2, 1>(0, k));
            Pose oqp = obs_pose, oqm = obs_pose;
            oqp.q = (obs_pose.q * quat_exp(d)).normalized();
            oqm.q = (obs_pose.q * quat_exp(-d)).normalized();
            check((eval_perturbed(anchor, oqp, inv_depth) -
                   eval_perturbed(anchor, oqm, inv_depth)) /
                      (2 * h),
                  Jo.block<2, 1>(0, 3 + k));
        }
        check((eval_perturbed(anchor, obs_pose, inv_depth + h) -
               eval_perturbed(anchor, obs_pose, inv_depth - h)) /
                  (2 * h),
              Jd);
    }
    EXPECT_LT(worst, 1e-4);
}

TEST(Jacobians, PreintegrationMatchesFiniteDifference) {
    Rng rng(42);
    const double h = 1e-6;
    const Vec3 gravity(0, 0, -9.81);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        NavState si, sj;
        si.p = Vec3(rng.normal(0, 2), rng.normal(0, 2), rng.normal(0, 2));
        si.q = quat_exp(Vec3(rng.normal(0, 0.8), rng.normal(0, 0.8), rng.normal(0, 0.8)));
        si.v = Vec3(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1));
        sj.p = si.p + Vec3(rng.normal(0, 0.5), rng.normal(0, 0.5), rng.normal(0, 0.5));
        sj.q = (si.q * quat_exp(Vec3(rng.normal(0, 0.3), rng.normal(0, 0.3), rng.normal(0, 0.3))))
                   .normalized();
        sj.v = si.v + Vec3(rng.normal(0, 0.5), rng.normal(0, 0.5), rng.normal(0, 0.5));
        PreintDelta delta;
        delta.dt = 0.1;
        delta.delta_q = quat_exp(Vec3(rng.normal(0, 0.2), rng.normal(0, 0.2), rng.normal(0, 0.2)));
        delta.delta_v = Vec3(rng.normal(0, 0.3), rng.normal(0, 0.3), rng.normal(0, 0.3));
        delta.delta_p = Vec3(rng.normal(0, 0.2), rng.normal(0, 0.2), rng.normal(0, 0.2));

        Eigen::Matrix<double, 9, 1> r0;
        Eigen::Matrix<double, 9, 9> Ji, Jj;
        preintegration_residual(si, sj, delta, gravity, &r0, &Ji, &Jj);

        auto eval = [&](const NavState& a, const NavState& b) {
            Eigen::Matrix<double, 9, 1> r;
            preintegration_residual(a, b, delta, gravity, &r);
            return r;
        };
        auto apply = [&](const NavState& s, int dim, double step) {
            NavState out = s;
            if (dim < 3) out.p(dim) += step;
            else if (dim < 6) {
                Vec3 d = Vec3::Zero();
                d(dim - 3) = step;
                out.q = (s.q * quat_exp(d)).normalized();
            } else
                out.v(dim - 6) += step;
            return out;
        };
        for (int dim = 0; dim < 9; ++dim) {
            const Eigen::Matrix<double, 9, 1> fd_i =
                (eval(apply(si, dim, h), sj) - eval(apply(si, dim, -h), sj)) / (2 * h);
            const Eigen::Matrix<double, 9, 1> fd_j =
                (eval(si, apply(sj, dim, h)) - eval(si, apply(sj, dim, -h))) / (2 * h);
            worst = std::max(worst, (fd_i - Ji.col(dim)).norm() / std::max(1.0, Ji.col(dim).norm()));
            worst = std::max(worst, (fd_j - Jj.col(dim)).norm() / std::max(1.0, Jj.col(dim).norm()));
        }
    }
    EXPECT_LT(worst, 1e-4);
}

// --- optimize_window ---

TEST(Optimize, GroundTruthIsGlobalOptimum) {
    WindowFixture fx;
    const auto report = fx.window.optimize();
    EXPECT_GT(report.landmarks, 20);
    EXPECT_LT(report.initial_cost, 1e-12);
    EXPECT_EQ(report.accepted_steps, 0);  // converged at entry
    EXPECT_TRUE(report.converged);
    EXPECT_LE(report.final_cost, report.initial_cost);
}

TEST(Optimize, RecoversFromPerturbation) {
    WindowFixture fx;
    fx.perturb(0.05, 2.0 * M_PI / 180.0, 0.1, 77);
    EXPECT_GT(fx.max_position_error(), 0.04);
    const auto report = fx.window.optimize();
    EXPECT_TRUE(report.cost_monotone);
    EXPECT_GT(report.accepted_steps, 0);
    EXPECT_LT(fx.max_position_error(), 1e-4);
    EXPECT_LT(fx.max_angle_error_deg(), 0.01);
    // quaternions stay unit
    for (const auto& f : fx.window.frames()) EXPECT_NEAR(f.nav.q.norm(), 1.0, 1e-12);
}

TEST(Optimize, CostMonotoneOverRandomPerturbations) {
    for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        WindowFixture fx(5, 30, false, seed);
        fx.perturb(0.08, 3.0 * M_PI / 180.0, 0.15, seed * 13);
        const auto report = fx.window.optimize();
        EXPECT_TRUE(report.cost_monotone) << "seed " << seed;
        EXPECT_LT(report.final_cost, report.initial_cost) << "seed " << seed;
    }
}

TEST(Optimize, NonFiniteEntryIdentifiesResidual) {
    WindowFixture fx;
    fx.window.landmarks().begin()->second.inv_depth = std::numeric_limits<double>::quiet_NaN();
    try {
        fx.window.optimize();
        FAIL() << "expected non-finite residual error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("track"), std::string::npos) << e.what();
    }
}

// --- slide_window ---

TEST(Slide, ReanchoredLandmarkKeepsWorldPoint) {
    WindowFixture fx;
    // world points of landmarks anchored at the departing frame
    std::map<int64_t, Vec3> before;
    for (const auto& [id, lm] : fx.window.landmarks())
        if (lm.anchor_frame_id == 0) before[id] = fx.window.landmark_world(id, lm);
    ASSERT_FALSE(before.empty());
    fx.window.slide();
    for (const auto& [id, p_before] : before) {
        const auto it = fx.window.landmarks().find(id);
        if (it == fx.window.landmarks().end()) continue;  // dropped for lack of observations
        EXPECT_NE(it->second.anchor_frame_id, 0);
        EXPECT_LT((fx.window.landmark_world(id, it->second) - p_before).norm(), 1e-10);
    }
}

TEST(Slide, WindowContentsAfterSlides) {
    WindowFixture fx(8, 30);
    for (int n = 1; n <= 3; ++n) {
        fx.window.slide();
        ASSERT_EQ(fx.window.frames().size(), static_cast<size_t>(8 - n));
        for (size_t i = 0; i < fx.window.frames().size(); ++i)
            EXPECT_EQ(fx.window.frames()[i].frame_id, static_cast<int64_t>(n + i));
    }
}

// --- gauge freedom ---

TEST(Gauge, ReprojectionInvariantUnderSim3) {
    WindowFixture fx(5, 25, /*identity_extrinsics=*/true);
    Rng rng(19);
    const double s = 1.7;
    const Mat3 R = quat_exp(Vec3(0.4, -0.2, 0.9)).toRotationMatrix();
    const Quat Rq(R);
    const Vec3 t(2.0, -1.0, 0.5);

    // collect residuals before and after transforming the whole solution
    auto collect = [&]() {
        std::vector<double> out;
        for (const auto& [id, lm] : fx.window.landmarks()) {
            const auto& obs = fx.window.observations().at(id);
            const WindowFrame* anchor = fx.window.find_frame(lm.anchor_frame_id);
            if (!anchor) continue;
            for (const auto& [fid, o] : obs) {
                if (fid == lm.anchor_frame_id) continue;
                const WindowFrame* target = fx.window.find_frame(fid);
                if (!target) continue;
                Vec2 r;
                if (reprojection_residual(Pose(anchor->nav.p, anchor->nav.q),
                                          Pose(target->nav.p, target->nav.q),
                                          fx.window.body_from_camera(),
                                          obs.at(lm.anchor_frame_id).unit, lm.inv_depth, o.unit,
                                          fx.window.focal(), &r))
                    out.push_back(r.norm());
            }
        }
        return out;
    };
    const auto before = collect();
    ASSERT_GT(before.size(), 20u);
    for (auto& f : fx.window.frames()) {
        f.nav.p = s * (R * f.nav.p) + t;
        f.nav.q = (Rq * f.nav.q).normalized();
        f.nav.v = s * (R * f.nav.v);
    }
    for (auto& [id, lm] : fx.window.landmarks()) lm.inv_depth /= s;
    const auto after = collect();
    ASSERT_EQ(before.size(), after.size());
    for (size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(before[i], after[i], 1e-9);
}

TEST(Gauge, PreintegrationInvariantUnderYawTranslation) {
    // gravity restricts the rigid gauge to yaw + translation: that is exactly
    // why trajectories are evaluated under sim(3)/pose-yaw alignment
    WindowFixture fx(5, 25, true);
    const Vec3 gravity = fx.manifest.gravity_vector();
    const Quat Rz = yaw_quat(0.8);
    const Vec3 t(1.0, -2.0, 0.4);

    std::vector<double> before, after;
    auto collect = [&](std::vector<double>& out) {
        for (size_t k = 0; k + 1 < fx.window.frames().size(); ++k) {
            Eigen::Matrix<double, 9, 1> r;
            preintegration_residual(fx.window.frames()[k].nav, fx.window.frames()[k + 1].nav,
                                    fx.window.preints()[k], gravity, &r);
            out.push_back(r.norm());
        }
    };
    collect(before);
    for (auto& f : fx.window.frames()) {
        f.nav.p = Rz * f.nav.p + t;
        f.nav.q = (Rz * f.nav.q).normalized();
        f.nav.v = Rz * f.nav.v;
    }
    collect(after);
    ASSERT_EQ(before.size(), after.size());
    for (size_t i = 0; i < before.size(); ++i) EXPECT_NEAR(before[i], after[i], 1e-9);
}

// --- windowed long run on exact observations ---

TEST(Estimator, LongRunDriftBelowBound) {
    // 200 camera frames at 20 FPS, ticks at 10 Hz, real 1 kHz preintegration,
    // exact unit-sphere observations; drift must stay under 0.1% of path length
    const SequenceManifest manifest = WindowFixture::make_fixture_manifest(false);
    EstimatorConfig cfg;
    PlanarTrajectory traj(std::make_shared<CirclePath>(Vec3(0, 0, 1.5), 1.5, 2.0 * M_PI / 15.0, 0.0,
                                                       0.15, 7.0),
                          0.0, 2.0 * M_PI / 15.0);
    Rng rng(5);
    std::vector<Vec3> points;
    for (int i = 0; i < 120; ++i) {
        const double az = rng.uniform(0, 2 * M_PI);
        points.emplace_back(6.0 * std::cos(az), 6.0 * std::sin(az), rng.uniform(0.0, 3.2));
    }
    const Vec3 gravity = manifest.gravity_vector();
    const double duration = 10.0;  // 200 camera frames
    std::vector<ImuSample> imu;
    for (int k = 0; k <= static_cast<int>(duration * 1000); ++k) {
        const double t = k / 1000.0;
        ImuSample s;
        s.t = t;
        s.accel = traj.pose(t).q.conjugate() * (traj.acceleration_world(t) - gravity);
        s.gyro = traj.angular_rate_body(t);
        imu.push_back(s);
    }

    SlidingWindow window(cfg, manifest);
    double path_length = 0.0;
    Vec3 last_gt = traj.pose(0.0).p;
    double worst_drift = 0.0;
    for (int frame_id = 0; frame_id <= 200; frame_id += cfg.decimation) {
        const double t = frame_id / 20.0;
        WindowFrame wf;
        wf.frame_id = frame_id;
        wf.t = t;
        PreintDelta delta;
        std::vector<ImuSample> interval;
        if (!window.frames().empty()) {
            const double t_prev = window.frames().back().t;
            const auto [a, b] = imu_span(imu, t_prev, t, 5e-4);
            interval.assign(imu.begin() + a, imu.begin() + b + 1);
            delta = integrate(interval, window.bias(), cfg.preint);
            wf.nav = predict(window.frames().back().nav, delta, gravity);
        } else {
            wf.nav.p = traj.pose(t).p;
            wf.nav.q = traj.pose(t).q;
            wf.nav.v = traj.velocity_world(0.0);
        }
        if (window.frames().size() == 1) {  // second frame also bootstrapped
            wf.nav.p = traj.pose(t).p;
            wf.nav.q = traj.pose(t).q;
            wf.nav.v = traj.velocity_world(t);
        }
        window.add_frame(wf, delta, std::move(interval));

        const Pose cam = Pose(traj.pose(t).p, traj.pose(t).q).compose(manifest.body_from_camera());
        std::vector<FeatureFrameEntry> entries;
        for (size_t i = 0; i < points.size(); ++i) {
            const Vec3 x_c = cam.inverse_transform(points[i]);
            if (x_c.z() < 0.3) continue;
            entries.push_back({static_cast<int64_t>(i), x_c.normalized(), Vec2(0, 0)});
        }
        window.add_observations(frame_id, entries);
        window.triangulate_new_landmarks();
        const auto report = window.optimize();
        EXPECT_TRUE(report.cost_monotone);
        if (static_cast<int>(window.frames().size()) > cfg.window_size) window.slide();

        path_length += (traj.pose(t).p - last_gt).norm();
        last_gt = traj.pose(t).p;
        worst_drift = std::max(worst_drift, (window.frames().back().nav.p - traj.pose(t).p).norm());
    }
    EXPECT_GT(path_length, 5.0);
    EXPECT_LT(worst_drift, 0.001 * path_length)
        << "drift " << worst_drift << " over path " << path_length;
}

// --- run_odometry on tiny sequences ---

TEST(RunOdometry, ZeroMotionStaysPut) {
    const auto manifest = make_default_manifest(96, 72, 20.0, 500.0);
    SceneSpec scene;  // featureless flat background: pure IMU dead reckoning
    scene.textured = false;
    scene.points.push_back(Vec3(6, 0, 1.5));
    SynthSpec spec;
    spec.duration = 2.0;
    spec.min_visible_fraction = 0.0;
    PlanarTrajectory traj(std::make_shared<PointPath>(Vec3(0, 0, 1.5)), 0.0, 0.0);
    const Sequence seq = synthesize_sequence(scene, traj, spec, manifest);

    OdometryOptions opt;
    const auto result = run_odometry(seq, FrontEnd::kOpticalFlow, opt);
    ASSERT_GT(result.trajectory.size(), 10u);
    for (const auto& pose : result.trajectory)
        EXPECT_LT((pose.position - Vec3(0, 0, 1.5)).norm(), 0.01);
}

TEST(RunOdometry, RequiresGroundTruthBootstrap) {
    const auto manifest = make_default_manifest(96, 72, 20.0, 500.0);
    SceneSpec scene;
    scene.textured = false;
    scene.points.push_back(Vec3(6, 0, 1.5));
    SynthSpec spec;
    spec.duration = 1.0;
    spec.min_visible_fraction = 0.0;
    PlanarTrajectory traj(std::make_shared<PointPath>(Vec3(0, 0, 1.5)), 0.0, 0.0);
    Sequence seq = synthesize_sequence(scene, traj, spec, manifest);
    seq.ground_truth.clear();
    EXPECT_THROW(run_odometry(seq, FrontEnd::kOpticalFlow, OdometryOptions{}), ValidationError);
}
