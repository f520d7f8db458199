#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "ofvio/geometry.hpp"
#include "ofvio/types.hpp"

namespace ofvio {

struct ImuBias {
    Vec3 accel = Vec3::Zero();  // m/s^2
    Vec3 gyro = Vec3::Zero();   // rad/s
};

struct PreintOptions {
    double gyro_noise_density = 1.7e-4;  // rad/s/sqrt(Hz)
    double accel_noise_density = 3e-3;   // m/s^2/sqrt(Hz)
    double nominal_period = 1e-3;        // expected sample spacing, s
    double max_gap_factor = 2.0;         // error when a gap exceeds factor * nominal
};

/// Preintegrated IMU increment between two instants, expressed in the frame at t_i.
/// Covariance blocks are ordered (rotation, velocity, position).
struct PreintDelta {
    double dt = 0.0;
    Quat delta_q = Quat::Identity();
    Vec3 delta_v = Vec3::Zero();
    Vec3 delta_p = Vec3::Zero();
    Eigen::Matrix<double, 9, 9> cov = Eigen::Matrix<double, 9, 9>::Zero();
};

/// Midpoint preintegration of the samples' span with first-order covariance
/// propagation. The bias is held constant over the interval.
inline PreintDelta integrate(std::span<const ImuSample> samples, const ImuBias& bias,
                             const PreintOptions& opt = {}) {
    if (samples.size() < 2)
        throw std::invalid_argument("integrate: need at least 2 IMU samples");
    PreintDelta d;
    const double sg2 = opt.gyro_noise_density * opt.gyro_noise_density;
    const double sa2 = opt.accel_noise_density * opt.accel_noise_density;

    for (size_t k = 0; k + 1 < samples.size(); ++k) {
        const ImuSample& s0 = samples[k];
        const ImuSample& s1 = samples[k + 1];
        const double dt = s1.t - s0.t;
        if (dt <= 0.0) throw std::invalid_argument("integrate: non-monotonic IMU timestamps");
        if (dt > opt.max_gap_factor * opt.nominal_period * (1.0 + 1e-9))
            throw std::invalid_argument("integrate: IMU gap of " + std::to_string(dt) +
                                        " s exceeds " + std::to_string(opt.max_gap_factor) +
                                        "x nominal period");

        const Vec3 gyro_mid = 0.5 * (s0.gyro + s1.gyro) - bias.gyro;
        const Quat dq_step = quat_exp(gyro_mid * dt);
        const Quat q_next = (d.delta_q * dq_step).normalized();

        const Vec3 acc0 = d.delta_q * (s0.accel - bias.accel);
        const Vec3 acc1 = q_next * (s1.accel - bias.accel);
        const Vec3 acc_avg = 0.5 * (acc0 + acc1);

        // first-order error-state propagation at the interval midpoint
        const Mat3 R_mid = (d.delta_q * quat_exp(gyro_mid * (0.5 * dt))).toRotationMatrix();
        const Vec3 acc_body = 0.5 * ((s0.accel - bias.accel) + (s1.accel - bias.accel));
        Eigen::Matrix<double, 9, 9> F = Eigen::Matrix<double, 9, 9>::Identity();
        F.block<3, 3>(0, 0) = dq_step.toRotationMatrix().transpose();
        F.block<3, 3>(3, 0) = -R_mid * skew(acc_body) * dt;
        F.block<3, 3>(6, 0) = -0.5 * R_mid * skew(acc_body) * dt * dt;
        F.block<3, 3>(6, 3) = Mat3::Identity() * dt;
        d.cov = F * d.cov * F.transpose();
        d.cov.block<3, 3>(0, 0) += sg2 * dt * Mat3::Identity();
        d.cov.block<3, 3>(3, 3) += sa2 * dt * Mat3::Identity();
        d.cov.block<3, 3>(6, 6) += 0.25 * sa2 * dt * dt * dt * Mat3::Identity();
        d.cov.block<3, 3>(3, 6) += 0.5 * sa2 * dt * dt * Mat3::Identity();
        d.cov.block<3, 3>(6, 3) += 0.5 * sa2 * dt * dt * Mat3::Identity();

        d.delta_p += d.delta_v * dt + 0.5 * acc_avg * dt * dt;
        d.delta_v += acc_avg * dt;
        d.delta_q = q_next;
        d.dt += dt;
    }
    return d;
}

/// Composition of consecutive increments: [t_i, t_j] o [t_j, t_k] -> [t_i, t_k].
inline PreintDelta compose(const PreintDelta& a, const PreintDelta& b) {
    PreintDelta out;
    out.dt = a.dt + b.dt;
    out.delta_q = (a.delta_q * b.delta_q).normalized();
    out.delta_v = a.delta_v + a.delta_q * b.delta_v;
    out.delta_p = a.delta_p + a.delta_v * b.dt + a.delta_q * b.delta_p;

    const Mat3 Ra = a.delta_q.toRotationMatrix();
    const Mat3 Rb = b.delta_q.toRotationMatrix();
    Eigen::Matrix<double, 9, 9> F = Eigen::Matrix<double, 9, 9>::Identity();
    F.block<3, 3>(0, 0) = Rb.transpose();
    F.block<3, 3>(3, 0) = -Ra * skew(b.delta_v);
    F.block<3, 3>(6, 0) = -Ra * skew(b.delta_p);
    F.block<3, 3>(6, 3) = Mat3::Identity() * b.dt;
    Eigen::Matrix<double, 9, 9> G = Eigen::Matrix<double, 9, 9>::Zero();
    G.block<3, 3>(0, 0) = Mat3::Identity();
    G.block<3, 3>(3, 3) = Ra;
    G.block<3, 3>(6, 6) = Ra;
    out.cov = F * a.cov * F.transpose() + G * b.cov * G.transpose();
    return out;
}

struct NavState {
    Vec3 p = Vec3::Zero();
    Quat q = Quat::Identity();
    Vec3 v = Vec3::Zero();
};

/// Propagates a world-frame state through a preintegrated increment,
/// reinjecting gravity.
inline NavState predict(const NavState& state_i, const PreintDelta& delta,
                        const Vec3& gravity = Vec3(0, 0, -9.81)) {
    NavState j;
    const double dt = delta.dt;
    j.q = (state_i.q * delta.delta_q).normalized();
    j.v = state_i.v + gravity * dt + state_i.q * delta.delta_v;
    j.p = state_i.p + state_i.v * dt + 0.5 * gravity * dt * dt + state_i.q * delta.delta_p;
    return j;
}

/// Index span [first, last] of samples covering [t0, t1]: the endpoints are the
/// samples nearest to t0/t1 within the tolerance (default half the IMU period).
inline std::pair<size_t, size_t> imu_span(const std::vector<ImuSample>& samples, double t0,
                                          double t1, double tolerance) {
    if (samples.size() < 2) throw std::invalid_argument("imu_span: need at least 2 samples");
    if (!(t1 > t0)) throw std::invalid_argument("imu_span: t1 must exceed t0");
    auto nearest = [&](double t) -> size_t {
        auto it = std::lower_bound(samples.begin(), samples.end(), t,
                                   [](const ImuSample& s, double v) { return s.t < v; });
        size_t idx = static_cast<size_t>(it - samples.begin());
        if (idx == samples.size()) idx = samples.size() - 1;
        if (idx > 0 && std::abs(samples[idx - 1].t - t) <= std::abs(samples[idx].t - t)) --idx;
        if (std::abs(samples[idx].t - t) > tolerance)
            throw std::invalid_argument("imu_span: no IMU sample within " + std::to_string(tolerance) +
                                        " s of t=" + std::to_string(t));
        return idx;
    };
    const size_t first = nearest(t0);
    const size_t last = nearest(t1);
    if (last <= first) throw std::invalid_argument("imu_span: empty span");
    return {first, last};
}

}  // namespace ofvio
