#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

namespace ofvio {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

/// Quaternion exponential of a rotation vector (angle-axis), exact for any magnitude.
inline Quat quat_exp(const Vec3& phi) {
    const double angle = phi.norm();
    if (angle < 1e-12) {
        // second-order series keeps unit norm to machine precision
        Quat q(1.0, 0.5 * phi.x(), 0.5 * phi.y(), 0.5 * phi.z());
        q.normalize();
        return q;
    }
    const double half = 0.5 * angle;
    const Vec3 axis = phi / angle;
    const double s = std::sin(half);
    return Quat(std::cos(half), s * axis.x(), s * axis.y(), s * axis.z());
}

/// Rotation-vector logarithm of a rotation matrix.
inline Vec3 so3_log(const Mat3& R) {
    const double tr = R.trace();
    const double cos_angle = std::min(1.0, std::max(-1.0, 0.5 * (tr - 1.0)));
    const double angle = std::acos(cos_angle);
    Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    if (angle < 1e-9) return 0.5 * w;
    if (angle > M_PI - 1e-6) {
        // near pi the off-diagonal vector degenerates; recover the axis from R + I
        Mat3 A = 0.5 * (R + Mat3::Identity());
        Vec3 axis;
        int k;
        A.diagonal().maxCoeff(&k);
        axis = A.col(k) / std::sqrt(A(k, k));
        axis.normalize();
        // sign from the skew part
        if (w.dot(axis) < 0.0) axis = -axis;
        return angle * axis;
    }
    return 0.5 * angle / std::sin(angle) * w;
}

inline Vec3 quat_log(const Quat& q_in) {
    Quat q = q_in.normalized();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const double vn = q.vec().norm();
    if (vn < 1e-12) return 2.0 * q.vec();
    const double angle = 2.0 * std::atan2(vn, q.w());
    return angle / vn * q.vec();
}

inline Mat3 exp_so3(const Vec3& phi) { return quat_exp(phi).toRotationMatrix(); }

/// Inverse of the right Jacobian of SO(3); exact, used for rotation-residual Jacobians.
inline Mat3 right_jacobian_inv(const Vec3& phi) {
    const double angle = phi.norm();
    const Mat3 hat = skew(phi);
    if (angle < 1e-8) return Mat3::Identity() + 0.5 * hat + (1.0 / 12.0) * hat * hat;
    const double c = 1.0 / (angle * angle) -
                     (1.0 + std::cos(angle)) / (2.0 * angle * std::sin(angle));
    return Mat3::Identity() + 0.5 * hat + c * hat * hat;
}

inline Mat3 left_jacobian_inv(const Vec3& phi) { return right_jacobian_inv(-phi); }

/// Geodesic angle between two rotations, radians.
inline double rotation_angle(const Quat& a, const Quat& b) {
    return quat_log(a.conjugate() * b).norm();
}

inline Quat yaw_quat(double yaw) {
    return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
}

/// Orthonormal basis of the tangent plane at a unit vector (rows of the returned 2x3).
inline Eigen::Matrix<double, 2, 3> tangent_basis(const Vec3& u) {
    Vec3 ref = std::abs(u.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
    const Vec3 b1 = u.cross(ref).normalized();
    const Vec3 b2 = u.cross(b1).normalized();
    Eigen::Matrix<double, 2, 3> basis;
    basis.row(0) = b1.transpose();
    basis.row(1) = b2.transpose();
    return basis;
}

}  // namespace ofvio
