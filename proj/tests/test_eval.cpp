#include <gtest/gtest.h>

#include "ofvio/eval.hpp"

using namespace ofvio;

namespace {

Trajectory circle_trajectory(double duration, double rate, double radius = 2.0,
                             double omega = 0.4) {
    Trajectory out;
    const int n = static_cast<int>(duration * rate);
    for (int k = 0; k <= n; ++k) {
        const double t = k / rate;
        GroundTruthPose g;
        g.t = t;
        g.position = Vec3(radius * std::cos(omega * t), radius * std::sin(omega * t),
                          1.0 + 0.2 * std::sin(0.5 * t));
        g.orientation = yaw_quat(omega * t);
        out.push_back(g);
    }
    return out;
}

Trajectory transform_trajectory(const Trajectory& traj, double scale, const Mat3& R, const Vec3& t) {
    Trajectory out = traj;
    const Quat rq(R);
    for (auto& s : out) {
        s.position = scale * (R * s.position) + t;
        s.orientation = (rq * s.orientation).normalized();
    }
    return out;
}

Mat3 random_rotation(Rng& rng) {
    return quat_exp(Vec3(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1))).toRotationMatrix();
}

}  // namespace

// --- associate ---

TEST(Associate, IdenticalTimestampsAllPaired) {
    const Trajectory gt = circle_trajectory(5.0, 10.0);
    const auto pairs = associate(gt, gt, 0.01);
    EXPECT_EQ(pairs.size(), gt.size());
}

TEST(Associate, SlowEstimateInsideFastGroundTruth) {
    const Trajectory gt = circle_trajectory(5.0, 100.0);
    const Trajectory est = circle_trajectory(5.0, 10.0);
    const auto pairs = associate(est, gt, 0.01);
    EXPECT_EQ(pairs.size(), est.size());
    for (size_t i = 0; i < pairs.size(); ++i)
        EXPECT_LE(std::abs(pairs[i].t - est[i].t), 0.005);
}

TEST(Associate, DisjointRangesError) {
    Trajectory a = circle_trajectory(2.0, 10.0);
    Trajectory b = a;
    for (auto& s : b) s.t += 100.0;
    EXPECT_THROW(associate(a, b, 0.01), std::invalid_argument);
}

// --- align_sim3 ---

TEST(AlignSim3, IdentityOnEqualTrajectories) {
    const Trajectory gt = circle_trajectory(5.0, 20.0);
    const auto a = align_sim3(associate(gt, gt, 0.01));
    EXPECT_NEAR(a.scale, 1.0, 1e-12);
    EXPECT_LT((a.rotation - Mat3::Identity()).norm(), 1e-12);
    EXPECT_LT(a.translation.norm(), 1e-12);
    EXPECT_NEAR(a.rmse, 0.0, 1e-12);
}

TEST(AlignSim3, RecoversRandomTransforms) {
    const Trajectory gt = circle_trajectory(6.0, 15.0);
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const double s = std::exp(rng.normal(0, 0.5));
        const Mat3 R = random_rotation(rng);
        const Vec3 t(rng.normal(0, 3), rng.normal(0, 3), rng.normal(0, 3));
        const Trajectory est = transform_trajectory(gt, s, R, t);
        const auto a = align_sim3(associate(est, gt, 0.01));
        EXPECT_NEAR(a.rmse, 0.0, 1e-9);
        for (size_t i = 0; i < gt.size(); i += 7)
            EXPECT_LT((apply_alignment(a, est[i].position) - gt[i].position).norm(), 1e-9);
    }
}

TEST(AlignSim3, NoiseResidualMatchesMonteCarloFactor) {
    const Trajectory gt = circle_trajectory(10.0, 20.0);  // 201 samples
    double ratio_sum = 0.0;
    const double sigma = 0.05;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(1000 + trial);
        Trajectory est = gt;
        for (auto& s : est)
            s.position += Vec3(rng.normal(0, sigma), rng.normal(0, sigma), rng.normal(0, sigma));
        const auto a = align_sim3(associate(est, gt, 0.01));
        ratio_sum += a.rmse / sigma;
    }
    // isotropic noise: RMSE approaches sigma * sqrt(3) minus the 7-dof fit correction
    const double mean_ratio = ratio_sum / trials;
    EXPECT_GT(mean_ratio, 1.60);
    EXPECT_LT(mean_ratio, 1.78);
}

TEST(AlignSim3, CollinearDegenerate) {
    Trajectory gt;
    for (int k = 0; k < 10; ++k) {
        GroundTruthPose g;
        g.t = k * 0.1;
        g.position = Vec3(k * 0.5, 0, 0);
        gt.push_back(g);
    }
    EXPECT_THROW(align_sim3(associate(gt, gt, 0.01)), std::invalid_argument);
}

// --- align_pose_yaw ---

TEST(AlignPoseYaw, RecoversYawAndTranslation) {
    const Trajectory gt = circle_trajectory(5.0, 20.0);
    const double yaw = 30.0 * M_PI / 180.0;
    const Vec3 shift(1.5, -2.0, 0.7);
    const Trajectory est = transform_trajectory(gt, 1.0, yaw_quat(-yaw).toRotationMatrix(),
                                                yaw_quat(-yaw) * -shift);
    // est = Rz(-yaw) (gt - shift): aligning est to gt must recover yaw and shift
    const auto a = align_pose_yaw(associate(est, gt, 0.01));
    EXPECT_NEAR(a.scale, 1.0, 0.0);
    EXPECT_LT((a.rotation - yaw_quat(yaw).toRotationMatrix()).norm(), 1e-9);
    EXPECT_LT((a.translation - shift).norm(), 1e-9);
    EXPECT_NEAR(a.rmse, 0.0, 1e-9);
}

TEST(AlignPoseYaw, IdentityOnEqualTrajectories) {
    const Trajectory gt = circle_trajectory(3.0, 20.0);
    const auto a = align_pose_yaw(associate(gt, gt, 0.01));
    EXPECT_LT((a.rotation - Mat3::Identity()).norm(), 1e-12);
    EXPECT_LT(a.translation.norm(), 1e-12);
}

TEST(AlignPoseYaw, RollCannotBeAbsorbed) {
    const Trajectory gt = circle_trajectory(5.0, 20.0);
    const Mat3 roll = quat_exp(Vec3(0.3, 0, 0)).toRotationMatrix();
    const Trajectory est = transform_trajectory(gt, 1.0, roll, Vec3::Zero());
    const auto a = align_pose_yaw(associate(est, gt, 0.01));
    EXPECT_GT(a.rmse, 0.05);
}

TEST(AlignPoseYaw, IdenticalPositionsError) {
    Trajectory gt;
    for (int k = 0; k < 5; ++k) {
        GroundTruthPose g;
        g.t = 0.1 * k;
        g.position = Vec3(1, 2, 3);
        gt.push_back(g);
    }
    EXPECT_THROW(align_pose_yaw(associate(gt, gt, 0.01)), std::invalid_argument);
}

TEST(Alignment, Sim3ResidualNeverExceedsPoseYaw) {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const Trajectory gt = circle_trajectory(6.0, 10.0, rng.uniform(1.0, 3.0),
                                                rng.uniform(0.2, 0.8));
        Trajectory est = transform_trajectory(
            gt, std::exp(rng.normal(0, 0.2)), random_rotation(rng),
            Vec3(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)));
        for (auto& s : est)
            s.position += Vec3(rng.normal(0, 0.05), rng.normal(0, 0.05), rng.normal(0, 0.05));
        const auto pairs = associate(est, gt, 0.01);
        EXPECT_LE(align_sim3(pairs).rmse, align_pose_yaw(pairs).rmse + 1e-12) << "trial " << trial;
    }
}

TEST(Alignment, InvariantToCommonRigidTransform) {
    const Trajectory gt = circle_trajectory(5.0, 10.0);
    Rng rng(8);
    Trajectory est = gt;
    for (auto& s : est)
        s.position += Vec3(rng.normal(0, 0.1), rng.normal(0, 0.1), rng.normal(0, 0.1));
    const double base_sim3 = align_sim3(associate(est, gt, 0.01)).rmse;
    const double base_yaw = align_pose_yaw(associate(est, gt, 0.01)).rmse;

    const Mat3 R = random_rotation(rng);
    const Vec3 t(3, -1, 2);
    const Trajectory gt2 = transform_trajectory(gt, 1.0, R, t);
    const Trajectory est2 = transform_trajectory(est, 1.0, R, t);
    EXPECT_NEAR(align_sim3(associate(est2, gt2, 0.01)).rmse, base_sim3, 1e-10);
    // pose-yaw restricts rotation to world z, so invariance holds for yaw+translation moves
    const Mat3 Rz = yaw_quat(1.1).toRotationMatrix();
    const Trajectory gt3 = transform_trajectory(gt, 1.0, Rz, t);
    const Trajectory est3 = transform_trajectory(est, 1.0, Rz, t);
    EXPECT_NEAR(align_pose_yaw(associate(est3, gt3, 0.01)).rmse, base_yaw, 1e-10);
}

// --- ate_rmse ---

TEST(AteRmse, ZeroError) {
    const Trajectory gt = circle_trajectory(2.0, 10.0);
    const auto [rmse, sd] = ate_rmse(associate(gt, gt, 0.01));
    EXPECT_DOUBLE_EQ(rmse, 0.0);
    EXPECT_DOUBLE_EQ(sd, 0.0);
}

TEST(AteRmse, ConstantError) {
    const Trajectory gt = circle_trajectory(2.0, 10.0);
    Trajectory est = gt;
    for (auto& s : est) s.position += Vec3(0.3, 0.0, 0.4);  // norm 0.5
    const auto [rmse, sd] = ate_rmse(associate(est, gt, 0.01));
    EXPECT_NEAR(rmse, 0.5, 1e-12);
    EXPECT_NEAR(sd, 0.0, 1e-12);
}

TEST(AteRmse, MatchesDirectRecomputation) {
    const Trajectory gt = circle_trajectory(3.0, 10.0);
    Rng rng(9);
    Trajectory est = gt;
    for (auto& s : est)
        s.position += Vec3(rng.normal(0, 0.2), rng.normal(0, 0.2), rng.normal(0, 0.2));
    const auto pairs = associate(est, gt, 0.01);
    const auto [rmse, sd] = ate_rmse(pairs);

    double sq = 0.0;
    std::vector<double> norms;
    for (const auto& p : pairs) {
        norms.push_back((p.gt.p - p.est.p).norm());
        sq += norms.back() * norms.back();
    }
    const double expect_rmse = std::sqrt(sq / norms.size());
    double mean = 0.0;
    for (double n : norms) mean += n;
    mean /= norms.size();
    double var = 0.0;
    for (double n : norms) var += (n - mean) * (n - mean);
    EXPECT_NEAR(rmse, expect_rmse, 1e-14);
    EXPECT_NEAR(sd, std::sqrt(var / norms.size()), 1e-14);
}

// --- subtrajectory_errors ---

TEST(SubTrajectories, PerfectEstimateZeroEverywhere) {
    const Trajectory gt = circle_trajectory(20.0, 20.0);
    const auto stats = subtrajectory_errors(gt, gt, {1.0, 2.0, 4.0}, 30, 5);
    ASSERT_EQ(stats.size(), 3u);
    for (const auto& s : stats) {
        EXPECT_NEAR(s.trans_median, 0.0, 1e-12);
        EXPECT_NEAR(s.rot_median_deg, 0.0, 1e-10);
    }
}

TEST(SubTrajectories, ConstantYawRateDriftGrowsLinearly) {
    const double radius = 2.0, omega = 0.4;
    const Trajectory gt = circle_trajectory(40.0, 20.0, radius, omega);
    const double drift_rate = 0.02;  // rad/s of extra yaw
    Trajectory est = gt;
    for (auto& s : est) {
        const Quat d = yaw_quat(drift_rate * s.t);
        s.position = d * s.position;
        s.orientation = (d * s.orientation).normalized();
    }
    const double speed = radius * omega;
    const std::vector<double> lengths = {1.0, 2.0, 4.0};
    const auto stats = subtrajectory_errors(est, gt, lengths, 60, 11);
    ASSERT_EQ(stats.size(), 3u);
    for (size_t i = 0; i < stats.size(); ++i) {
        const double expected_deg = drift_rate * (lengths[i] / speed) * 180.0 / M_PI;
        EXPECT_NEAR(stats[i].rot_median_deg, expected_deg, 0.25 * expected_deg)
            << "length " << lengths[i];
    }
    // linear growth between lengths
    EXPECT_NEAR(stats[2].rot_median_deg / stats[0].rot_median_deg, 4.0, 1.0);
}

TEST(SubTrajectories, DeterministicUnderSeed) {
    const Trajectory gt = circle_trajectory(30.0, 20.0);
    Rng rng(3);
    Trajectory est = gt;
    for (auto& s : est)
        s.position += Vec3(rng.normal(0, 0.05), rng.normal(0, 0.05), rng.normal(0, 0.05));
    const auto a = subtrajectory_errors(est, gt, {2.0, 5.0}, 40, 123);
    const auto b = subtrajectory_errors(est, gt, {2.0, 5.0}, 40, 123);
    ASSERT_EQ(a.size(), b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].trans_errors, b[i].trans_errors);
        EXPECT_EQ(a[i].rot_errors_deg, b[i].rot_errors_deg);
    }
}

TEST(SubTrajectories, OverlongLengthSkipped) {
    const Trajectory gt = circle_trajectory(5.0, 20.0);  // path about 4 m
    const auto stats = subtrajectory_errors(gt, gt, {1.0, 500.0}, 10, 1);
    ASSERT_EQ(stats.size(), 1u);
    EXPECT_DOUBLE_EQ(stats[0].length_m, 1.0);
}

// --- align_prefix ---

TEST(AlignPrefix, PerfectEstimate) {
    const Trajectory gt = circle_trajectory(20.0, 20.0);
    const auto a = align_prefix(gt, gt, 15.0);
    EXPECT_LT((a.rotation - Mat3::Identity()).norm(), 1e-10);
    EXPECT_LT(a.translation.norm(), 1e-10);
}

TEST(AlignPrefix, DriftAfterPrefixSurfaces) {
    const Trajectory gt = circle_trajectory(30.0, 20.0);
    Trajectory est = gt;
    for (auto& s : est)
        if (s.t > 15.0) s.position += Vec3(0.1 * (s.t - 15.0), 0, 0);  // diverges after 15 s
    const auto a = align_prefix(est, gt, 15.0);
    EXPECT_NEAR(a.rmse, 0.0, 1e-9);  // prefix fit is clean
    const auto aligned = apply_alignment(a, est);
    const auto [rmse, sd] = ate_rmse(associate(aligned, gt, 0.01));
    EXPECT_GT(rmse, 0.3);
}

TEST(AlignPrefix, InsufficientSpanError) {
    const Trajectory gt = circle_trajectory(10.0, 20.0);
    EXPECT_THROW(align_prefix(gt, gt, 15.0), std::invalid_argument);
}
