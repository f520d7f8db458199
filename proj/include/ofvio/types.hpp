#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "ofvio/camera.hpp"
#include "ofvio/geometry.hpp"
#include "ofvio/image.hpp"

namespace ofvio {

struct Pose {
    Vec3 p = Vec3::Zero();
    Quat q = Quat::Identity();

    Pose() = default;
    Pose(const Vec3& p_, const Quat& q_) : p(p_), q(q_) {}

    Vec3 transform(const Vec3& x) const { return q * x + p; }
    Vec3 inverse_transform(const Vec3& x) const { return q.conjugate() * (x - p); }
    Pose compose(const Pose& other) const { return Pose(q * other.p + p, (q * other.q).normalized()); }
    Pose inverse() const {
        const Quat qi = q.conjugate();
        return Pose(qi * (-p), qi);
    }
};

/// Raw IMU measurement: specific force and angular rate in the body frame.
struct ImuSample {
    double t = 0.0;            // seconds
    Vec3 accel = Vec3::Zero(); // m/s^2
    Vec3 gyro = Vec3::Zero();  // rad/s
};

struct FrameRecord {
    int64_t frame_id = 0;
    double t = 0.0;
    Image8 image;  // 8-bit grayscale

    int width() const { return image.width(); }
    int height() const { return image.height(); }
};

struct GroundTruthPose {
    double t = 0.0;
    Vec3 position = Vec3::Zero();
    Quat orientation = Quat::Identity();  // body in world
};

/// One matched feature displacement between consecutive frames.
/// The emulator produces integer pixel coordinates; the host tracker sub-pixel ones.
struct FlowVector {
    Vec2 prev = Vec2::Zero();
    Vec2 curr = Vec2::Zero();
    int hamming = 0;
    double cornerness = 0.0;
};

/// Calibration and rate container for a recorded or synthesized sequence.
struct SequenceManifest {
    PinholeRadTan camera;
    int width = 0;
    int height = 0;
    Quat q_bc = Quat::Identity();  // camera-to-body rotation: x_b = q_bc * x_c + p_bc
    Vec3 p_bc = Vec3::Zero();
    double frame_rate_hz = 0.0;
    double imu_rate_hz = 0.0;
    double gravity = 9.81;  // magnitude; world gravity vector is (0, 0, -gravity)
    double accel_noise_density = 3e-3;   // m/s^2/sqrt(Hz), MPU6500-class defaults
    double gyro_noise_density = 1.7e-4;  // rad/s/sqrt(Hz)

    Vec3 gravity_vector() const { return Vec3(0.0, 0.0, -gravity); }
    Pose body_from_camera() const { return Pose(p_bc, q_bc); }
};

struct Sequence {
    SequenceManifest manifest;
    std::vector<FrameRecord> frames;
    std::vector<ImuSample> imu;
    std::map<int64_t, std::vector<FlowVector>> of_records;  // keyed by frame_id
    std::vector<GroundTruthPose> ground_truth;

    bool has_flow() const { return !of_records.empty(); }
    bool has_ground_truth() const { return !ground_truth.empty(); }
};

}  // namespace ofvio
