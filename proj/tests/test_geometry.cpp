#include <gtest/gtest.h>

#include "ofvio/geometry.hpp"
#include "ofvio/rng.hpp"

using namespace ofvio;

TEST(Geometry, ExpLogRoundTrip) {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const Vec3 phi(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1));
        const Quat q = quat_exp(phi);
        EXPECT_NEAR(q.norm(), 1.0, 1e-12);
        if (phi.norm() < M_PI) {  // log is the inverse only inside the ball of radius pi
            const Vec3 back = quat_log(q);
            EXPECT_LT((back - phi).norm(), 1e-9) << "phi " << phi.transpose();
        }
    }
}

TEST(Geometry, LogMatrixMatchesQuaternion) {
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
        const Vec3 phi = Vec3(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)).normalized() *
                         rng.uniform(1e-6, 3.0);
        const Quat q = quat_exp(phi);
        EXPECT_LT((so3_log(q.toRotationMatrix()) - quat_log(q)).norm(), 1e-8);
    }
}

TEST(Geometry, SmallAngleStability) {
    const Vec3 tiny(1e-14, -2e-14, 5e-15);
    const Quat q = quat_exp(tiny);
    EXPECT_NEAR(q.w(), 1.0, 1e-12);
    EXPECT_LT((quat_log(q) - tiny).norm(), 1e-15);
}

// Jr_inv(phi) should match the numerical derivative of log(Exp(phi) Exp(d)).
TEST(Geometry, RightJacobianInverseMatchesFiniteDifference) {
    Rng rng(13);
    const double h = 1e-7;
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 phi = Vec3(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)).normalized() *
                         rng.uniform(0.05, 2.5);
        const Mat3 J = right_jacobian_inv(phi);
        const Quat base = quat_exp(phi);
        for (int k = 0; k < 3; ++k) {
            Vec3 d = Vec3::Zero();
            d(k) = h;
            const Vec3 plus = quat_log(base * quat_exp(d));
            const Vec3 minus = quat_log(base * quat_exp(-d));
            const Vec3 fd = (plus - minus) / (2.0 * h);
            EXPECT_LT((fd - J.col(k)).norm(), 1e-5) << "phi " << phi.transpose() << " col " << k;
        }
    }
}

TEST(Geometry, TangentBasisOrthonormal) {
    Rng rng(14);
    for (int i = 0; i < 100; ++i) {
        const Vec3 u = Vec3(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)).normalized();
        const auto T = tangent_basis(u);
        EXPECT_NEAR(T.row(0).norm(), 1.0, 1e-12);
        EXPECT_NEAR(T.row(1).norm(), 1.0, 1e-12);
        EXPECT_NEAR(T.row(0).dot(T.row(1)), 0.0, 1e-12);
        EXPECT_NEAR(T.row(0).dot(u), 0.0, 1e-12);
        EXPECT_NEAR(T.row(1).dot(u), 0.0, 1e-12);
    }
}

TEST(Geometry, RotationAngle) {
    const Quat a = quat_exp(Vec3(0, 0, 0.3));
    const Quat b = quat_exp(Vec3(0, 0, 0.5));
    EXPECT_NEAR(rotation_angle(a, b), 0.2, 1e-12);
}
