#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ofvio/rng.hpp"
#include "ofvio/types.hpp"

namespace ofvio {

// --- Analytic planar paths (position plus exact first/second derivatives) ---

class PathModel {
  public:
    virtual ~PathModel() = default;
    virtual Vec3 position(double t) const = 0;
    virtual Vec3 velocity(double t) const = 0;
    virtual Vec3 acceleration(double t) const = 0;
};

class PointPath : public PathModel {
  public:
    explicit PointPath(const Vec3& p) : p_(p) {}
    Vec3 position(double) const override { return p_; }
    Vec3 velocity(double) const override { return Vec3::Zero(); }
    Vec3 acceleration(double) const override { return Vec3::Zero(); }

  private:
    Vec3 p_;
};

class CirclePath : public PathModel {
  public:
    CirclePath(const Vec3& center, double radius, double angular_rate, double theta0 = 0.0,
               double z_amplitude = 0.0, double z_period = 10.0)
        : c_(center), r_(radius), w_(angular_rate), theta0_(theta0), za_(z_amplitude),
          wz_(2.0 * M_PI / z_period) {}

    Vec3 position(double t) const override {
        const double th = theta0_ + w_ * t;
        return c_ + Vec3(r_ * std::cos(th), r_ * std::sin(th), za_ * std::sin(wz_ * t));
    }
    Vec3 velocity(double t) const override {
        const double th = theta0_ + w_ * t;
        return Vec3(-r_ * w_ * std::sin(th), r_ * w_ * std::cos(th), za_ * wz_ * std::cos(wz_ * t));
    }
    Vec3 acceleration(double t) const override {
        const double th = theta0_ + w_ * t;
        return Vec3(-r_ * w_ * w_ * std::cos(th), -r_ * w_ * w_ * std::sin(th),
                    -za_ * wz_ * wz_ * std::sin(wz_ * t));
    }

  private:
    Vec3 c_;
    double r_, w_, theta0_, za_, wz_;
};

/// Lemniscate of Gerono: (A sin(phi), B sin(phi) cos(phi)) with phi = 2*pi*t/period.
class FigureEightPath : public PathModel {
  public:
    FigureEightPath(const Vec3& center, double a, double b, double period,
                    double z_amplitude = 0.0, double z_period = 10.0)
        : c_(center), a_(a), b_(b), w_(2.0 * M_PI / period), za_(z_amplitude),
          wz_(2.0 * M_PI / z_period) {}

    Vec3 position(double t) const override {
        const double ph = w_ * t;
        return c_ + Vec3(a_ * std::sin(ph), 0.5 * b_ * std::sin(2.0 * ph), za_ * std::sin(wz_ * t));
    }
    Vec3 velocity(double t) const override {
        const double ph = w_ * t;
        return Vec3(a_ * w_ * std::cos(ph), b_ * w_ * std::cos(2.0 * ph),
                    za_ * wz_ * std::cos(wz_ * t));
    }
    Vec3 acceleration(double t) const override {
        const double ph = w_ * t;
        return Vec3(-a_ * w_ * w_ * std::sin(ph), -2.0 * b_ * w_ * w_ * std::sin(2.0 * ph),
                    -za_ * wz_ * wz_ * std::sin(wz_ * t));
    }

  private:
    Vec3 c_;
    double a_, b_, w_, za_, wz_;
};

/// C2 blend of two paths over [t0, t1] using a quintic smoothstep.
class BlendedPath : public PathModel {
  public:
    BlendedPath(std::shared_ptr<PathModel> a, std::shared_ptr<PathModel> b, double t0, double t1)
        : a_(std::move(a)), b_(std::move(b)), t0_(t0), t1_(t1) {
        if (!(t1_ > t0_)) throw std::invalid_argument("BlendedPath: t1 must exceed t0");
    }

    Vec3 position(double t) const override {
        const auto [w, dw, ddw] = weight(t);
        (void)dw; (void)ddw;
        return (1.0 - w) * a_->position(t) + w * b_->position(t);
    }
    Vec3 velocity(double t) const override {
        const auto [w, dw, ddw] = weight(t);
        (void)ddw;
        return (1.0 - w) * a_->velocity(t) + w * b_->velocity(t) +
               dw * (b_->position(t) - a_->position(t));
    }
    Vec3 acceleration(double t) const override {
        const auto [w, dw, ddw] = weight(t);
        return (1.0 - w) * a_->acceleration(t) + w * b_->acceleration(t) +
               2.0 * dw * (b_->velocity(t) - a_->velocity(t)) +
               ddw * (b_->position(t) - a_->position(t));
    }

  private:
    struct W { double w, dw, ddw; };
    W weight(double t) const {
        if (t <= t0_) return {0.0, 0.0, 0.0};
        if (t >= t1_) return {1.0, 0.0, 0.0};
        const double span = t1_ - t0_;
        const double s = (t - t0_) / span;
        const double w = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
        const double dw = 30.0 * s * s * (1.0 - s) * (1.0 - s) / span;
        const double ddw = (60.0 * s - 180.0 * s * s + 120.0 * s * s * s) / (span * span);
        return {w, dw, ddw};
    }

    std::shared_ptr<PathModel> a_, b_;
    double t0_, t1_;
};

// --- Trajectory: planar path + yaw law; body frame is z-up ---
// R_wb = Rz(yaw(t)), so the body-frame angular rate is (0, 0, yaw_rate).

class TrajectoryModel {
  public:
    virtual ~TrajectoryModel() = default;
    virtual Pose pose(double t) const = 0;
    virtual Vec3 velocity_world(double t) const = 0;
    virtual Vec3 acceleration_world(double t) const = 0;
    virtual Vec3 angular_rate_body(double t) const = 0;
};

class PlanarTrajectory : public TrajectoryModel {
  public:
    PlanarTrajectory(std::shared_ptr<PathModel> path, double yaw0, double yaw_rate)
        : path_(std::move(path)), yaw0_(yaw0), yaw_rate_(yaw_rate) {}

    Pose pose(double t) const override {
        return Pose(path_->position(t), yaw_quat(yaw0_ + yaw_rate_ * t));
    }
    Vec3 velocity_world(double t) const override { return path_->velocity(t); }
    Vec3 acceleration_world(double t) const override { return path_->acceleration(t); }
    Vec3 angular_rate_body(double t) const override { return Vec3(0.0, 0.0, yaw_rate_); }

  private:
    std::shared_ptr<PathModel> path_;
    double yaw0_, yaw_rate_;
};

/// Manifest with the toolkit's default synthetic calibration: ~65 degree FOV,
/// mild radial-tangential distortion, camera along body +x pitched slightly
/// down with a small lever arm.
inline SequenceManifest make_default_manifest(int width, int height, double fps, double imu_rate);

/// Camera mounted looking along body +x: image right = -y_b, image down = -z_b.
inline Quat camera_forward_extrinsics() {
    Mat3 R;
    R << 0.0, 0.0, 1.0,
        -1.0, 0.0, 0.0,
         0.0, -1.0, 0.0;
    return Quat(R);
}

// --- Scene ---

struct TextureCylinder {
    Vec2 center = Vec2::Zero();  // axis through (x, y), parallel to world z
    double radius = 6.0;
    double base_intensity = 90.0;
    double amplitude = 10.0;   // peak deviation from base
    double scale_m = 0.25;     // lateral feature size on the surface
    uint64_t seed = 7;
};

struct SceneSpec {
    std::vector<Vec3> points;
    bool textured = false;          // when false the background is flat base_intensity
    TextureCylinder texture;
};

/// Landmarks scattered on a cylinder wall (slightly inside the texture surface).
inline SceneSpec make_cylinder_scene(uint64_t seed, int n_points, double radius, double z_min,
                                     double z_max, bool textured = true) {
    SceneSpec scene;
    scene.textured = textured;
    scene.texture.radius = radius;
    scene.texture.seed = seed * 31 + 5;
    Rng rng(seed);
    scene.points.reserve(n_points);
    for (int i = 0; i < n_points; ++i) {
        const double az = rng.uniform(0.0, 2.0 * M_PI);
        const double z = rng.uniform(z_min, z_max);
        const double r = radius - 0.02;
        scene.points.emplace_back(r * std::cos(az), r * std::sin(az), z);
    }
    return scene;
}

struct ImuNoiseSpec {
    double accel_sd = 0.0;  // per-sample white noise, m/s^2
    double gyro_sd = 0.0;   // rad/s
    Vec3 accel_bias = Vec3::Zero();
    Vec3 gyro_bias = Vec3::Zero();
};

struct SynthSpec {
    double duration = 10.0;  // seconds
    uint64_t seed = 1;
    ImuNoiseSpec noise;
    double min_visible_fraction = 0.02;  // of scene points in front of the camera, per frame
    double blob_peak = 110.0;            // sprite brightness above background
    double blob_sigma = 0.7;             // pixels
};

// --- Rendering ---

namespace detail {

inline double cylinder_intensity(const TextureCylinder& tex, const Vec3& origin, const Vec3& dir) {
    // forward intersection with x^2 + y^2 = R^2 around tex.center
    const double ox = origin.x() - tex.center.x();
    const double oy = origin.y() - tex.center.y();
    const double a = dir.x() * dir.x() + dir.y() * dir.y();
    if (a < 1e-12) return tex.base_intensity;
    const double b = 2.0 * (ox * dir.x() + oy * dir.y());
    const double c = ox * ox + oy * oy - tex.radius * tex.radius;
    const double disc = b * b - 4.0 * a * c;
    if (disc <= 0.0) return tex.base_intensity;
    const double s = (-b + std::sqrt(disc)) / (2.0 * a);  // camera inside: take the far root
    if (s <= 0.0) return tex.base_intensity;
    const Vec3 hit = origin + s * dir;
    const double az = std::atan2(hit.y() - tex.center.y(), hit.x() - tex.center.x());
    const double u = az * tex.radius / tex.scale_m;
    const double v = hit.z() / tex.scale_m;
    const double n = value_noise(tex.seed, u, v);
    return tex.base_intensity + tex.amplitude * (2.0 * n - 1.0);
}

inline uint8_t clamp_u8(double v) {
    return static_cast<uint8_t>(std::clamp(v, 0.0, 255.0) + 0.5);
}

}  // namespace detail

/// Renders one frame: textured (or flat) background plus 3x3 Gaussian point sprites.
/// `rays` caches the per-pixel unit rays in the camera frame.
inline Image8 render_frame(const SceneSpec& scene, const SequenceManifest& manifest,
                           const Pose& body_pose, const std::vector<Vec3>& rays,
                           const SynthSpec& spec, int64_t frame_index, int* visible_count) {
    const int w = manifest.width, h = manifest.height;
    Image8 img(w, h);
    const Pose cam_pose = body_pose.compose(manifest.body_from_camera());  // camera in world
    const Mat3 R_wc = cam_pose.q.toRotationMatrix();

    if (scene.textured) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const Vec3 dir = R_wc * rays[static_cast<size_t>(y) * w + x];
                img.at(x, y) =
                    detail::clamp_u8(detail::cylinder_intensity(scene.texture, cam_pose.p, dir));
            }
    } else {
        std::fill(img.data().begin(), img.data().end(),
                  detail::clamp_u8(scene.texture.base_intensity));
    }

    int in_front = 0;
    const double inv_two_sigma2 = 1.0 / (2.0 * spec.blob_sigma * spec.blob_sigma);
    for (size_t i = 0; i < scene.points.size(); ++i) {
        const Vec3 p_cam = cam_pose.inverse_transform(scene.points[i]);
        if (p_cam.z() < 0.05) continue;
        ++in_front;
        Vec2 px;
        try {
            px = manifest.camera.project(p_cam);
        } catch (const std::exception&) {
            continue;
        }
        const int cx = static_cast<int>(std::lround(px.x()));
        const int cy = static_cast<int>(std::lround(px.y()));
        if (cx < -1 || cx > w || cy < -1 || cy > h) continue;
        const double peak = spec.blob_peak * (0.75 + 0.25 * lattice_value(spec.seed, i, 0));
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int ix = cx + dx, iy = cy + dy;
                if (ix < 0 || ix >= w || iy < 0 || iy >= h) continue;
                const double r2 = (ix - px.x()) * (ix - px.x()) + (iy - px.y()) * (iy - px.y());
                const double v = img.at(ix, iy) + peak * std::exp(-r2 * inv_two_sigma2);
                img.at(ix, iy) = detail::clamp_u8(v);
            }
    }
    if (visible_count) *visible_count = in_front;
    (void)frame_index;
    return img;
}

/// Synthesizes a full sequence: rendered frames, exact-derivative IMU samples,
/// and ground-truth poses at the IMU rate.
inline Sequence synthesize_sequence(const SceneSpec& scene, const TrajectoryModel& trajectory,
                                    const SynthSpec& spec, const SequenceManifest& manifest) {
    if (manifest.width < 32 || manifest.height < 32)
        throw std::invalid_argument("synthesize_sequence: manifest width/height too small");
    Sequence seq;
    seq.manifest = manifest;

    const Vec3 g = manifest.gravity_vector();
    const int n_imu = static_cast<int>(std::lround(spec.duration * manifest.imu_rate_hz));
    const int n_frames = static_cast<int>(std::lround(spec.duration * manifest.frame_rate_hz));
    if (n_imu < 2 || n_frames < 1)
        throw std::invalid_argument("synthesize_sequence: duration too short for the given rates");

    Rng noise_rng(spec.seed);
    seq.imu.reserve(n_imu + 1);
    seq.ground_truth.reserve(n_imu + 1);
    for (int k = 0; k <= n_imu; ++k) {
        const double t = static_cast<double>(k) / manifest.imu_rate_hz;
        const Pose pose = trajectory.pose(t);
        ImuSample s;
        s.t = t;
        // specific force: f = R^T (a - g); a stationary body measures +|g|
        s.accel = pose.q.conjugate() * (trajectory.acceleration_world(t) - g) + spec.noise.accel_bias;
        s.gyro = trajectory.angular_rate_body(t) + spec.noise.gyro_bias;
        if (spec.noise.accel_sd > 0.0)
            s.accel += Vec3(noise_rng.normal(0, spec.noise.accel_sd),
                            noise_rng.normal(0, spec.noise.accel_sd),
                            noise_rng.normal(0, spec.noise.accel_sd));
        if (spec.noise.gyro_sd > 0.0)
            s.gyro += Vec3(noise_rng.normal(0, spec.noise.gyro_sd),
                           noise_rng.normal(0, spec.noise.gyro_sd),
                           noise_rng.normal(0, spec.noise.gyro_sd));
        seq.imu.push_back(s);

        GroundTruthPose gt;
        gt.t = t;
        gt.position = pose.p;
        gt.orientation = pose.q;
        seq.ground_truth.push_back(gt);
    }

    // per-pixel camera-frame rays, shared across frames
    std::vector<Vec3> rays;
    if (scene.textured) {
        rays.resize(static_cast<size_t>(manifest.width) * manifest.height);
        for (int y = 0; y < manifest.height; ++y)
            for (int x = 0; x < manifest.width; ++x)
                rays[static_cast<size_t>(y) * manifest.width + x] =
                    manifest.camera.undistort_project(Vec2(x, y));
    }

    seq.frames.reserve(n_frames);
    for (int k = 0; k < n_frames; ++k) {
        const double t = static_cast<double>(k) / manifest.frame_rate_hz;
        FrameRecord rec;
        rec.frame_id = k;
        rec.t = t;
        int visible = 0;
        rec.image = render_frame(scene, manifest, trajectory.pose(t), rays, spec, k, &visible);
        if (visible == 0)
            throw std::runtime_error("synthesize_sequence: all points behind camera at frame " +
                                     std::to_string(k));
        if (!scene.points.empty() &&
            static_cast<double>(visible) / scene.points.size() < spec.min_visible_fraction)
            throw std::runtime_error("synthesize_sequence: visible point fraction below " +
                                     std::to_string(spec.min_visible_fraction) + " at frame " +
                                     std::to_string(k));
        seq.frames.push_back(std::move(rec));
    }
    return seq;
}

inline SequenceManifest make_default_manifest(int width, int height, double fps, double imu_rate) {
    SequenceManifest m;
    m.width = width;
    m.height = height;
    m.camera.fx = m.camera.fy = 0.78 * width;
    m.camera.cx = 0.5 * (width - 1);
    m.camera.cy = 0.5 * (height - 1);
    m.camera.k1 = -0.03;
    m.camera.k2 = 0.005;
    m.camera.p1 = 1e-4;
    m.camera.p2 = -1e-4;
    m.frame_rate_hz = fps;
    m.imu_rate_hz = imu_rate;
    m.q_bc = (camera_forward_extrinsics() * quat_exp(Vec3(0.05, 0.0, 0.0))).normalized();
    m.p_bc = Vec3(0.05, 0.01, -0.02);
    return m;
}

/// Frame stream panning across a larger texture, dx/dy pixels per frame.
/// Used for known-motion tests of the emulator.
inline std::vector<Image8> make_panning_frames(const Image8& texture, int width, int height,
                                               int n_frames, int dx, int dy) {
    if (width + std::abs(dx) * n_frames > texture.width() ||
        height + std::abs(dy) * n_frames > texture.height())
        throw std::invalid_argument("make_panning_frames: texture too small for requested pan");
    std::vector<Image8> frames;
    frames.reserve(n_frames);
    const int x0 = dx < 0 ? -dx * n_frames : 0;
    const int y0 = dy < 0 ? -dy * n_frames : 0;
    for (int k = 0; k < n_frames; ++k)
        frames.push_back(crop(texture, x0 + dx * k, y0 + dy * k, width, height));
    return frames;
}

}  // namespace ofvio
