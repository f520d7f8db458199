#pragma once

#include <chrono>
#include <stdexcept>
#include <string>
#include <vector>

#include "ofvio/dataset.hpp"
#include "ofvio/estimator.hpp"
#include "ofvio/eval.hpp"
#include "ofvio/host_tracker.hpp"
#include "ofvio/sensor_emu.hpp"
#include "ofvio/tracker.hpp"

namespace ofvio {

enum class FrontEnd { kOpticalFlow, kHost };

inline FrontEnd parse_front_end(const std::string& name) {
    if (name == "of") return FrontEnd::kOpticalFlow;
    if (name == "host") return FrontEnd::kHost;
    throw ValidationError("unknown front-end '" + name + "' (expected 'of' or 'host')");
}

struct OdometryOptions {
    EstimatorConfig estimator;
    SensorConfig sensor;  // used to emulate flow when the sequence carries none
    int tracker_capacity = 150;
    HostTrackerConfig host;
    double gt_match_tolerance = 2e-3;  // s, bootstrap pose lookup
};

struct TickDiagnostic {
    int64_t frame_id = 0;
    double t = 0.0;
    double cost = 0.0;
    int iterations = 0;
    int landmarks = 0;
    int active_tracks = 0;
    double optimize_ms = 0.0;
};

struct OdometryResult {
    Trajectory trajectory;  // body poses, one per estimator tick
    std::vector<TickDiagnostic> diagnostics;
    std::vector<double> feature_update_ms;  // per camera frame (front-end + track update)
    std::vector<double> estimation_ms;      // per estimator tick
};

namespace odometry_detail {

inline double ms_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

/// Ground-truth navigation state at time t; velocity by central difference.
inline NavState gt_state_at(const std::vector<GroundTruthPose>& gt, double t, double tolerance) {
    auto it = std::lower_bound(gt.begin(), gt.end(), t,
                               [](const GroundTruthPose& g, double v) { return g.t < v; });
    size_t idx = static_cast<size_t>(it - gt.begin());
    if (idx == gt.size()) idx = gt.size() - 1;
    if (idx > 0 && std::abs(gt[idx - 1].t - t) <= std::abs(gt[idx].t - t)) --idx;
    if (std::abs(gt[idx].t - t) > tolerance)
        throw ValidationError("bootstrap: no ground-truth pose within " + std::to_string(tolerance) +
                              " s of t=" + std::to_string(t));
    NavState nav;
    nav.p = gt[idx].position;
    nav.q = gt[idx].orientation;
    const size_t lo = idx > 0 ? idx - 1 : idx;
    const size_t hi = idx + 1 < gt.size() ? idx + 1 : idx;
    const double dt = gt[hi].t - gt[lo].t;
    nav.v = dt > 1e-12 ? Vec3((gt[hi].position - gt[lo].position) / dt) : Vec3::Zero();
    return nav;
}

}  // namespace odometry_detail

/// Runs the full pipeline on a sequence. Both front-ends feed the identical
/// tracker + estimator path; only the flow-vector source differs.
///
/// Initialization uses the ground-truth bootstrap: the first two window frames
/// take pose and velocity from ground truth. Without landmarks (e.g. before
/// parallax builds up) the window dead-reckons on the IMU.
inline OdometryResult run_odometry(const Sequence& seq, FrontEnd front_end,
                                   const OdometryOptions& opt = {}) {
    if (seq.frames.empty()) throw ValidationError("run_odometry: sequence has no frames");
    if (seq.imu.size() < 2) throw ValidationError("run_odometry: sequence has no IMU samples");
    if (!seq.has_ground_truth())
        throw ValidationError(
            "run_odometry: initialization failed: ground-truth bootstrap requires groundtruth.txt");
    for (size_t i = 1; i < seq.frames.size(); ++i)
        if (seq.frames[i].frame_id != seq.frames[i - 1].frame_id + 1)
            throw ValidationError("run_odometry: frame ids must be consecutive");

    // materialize per-frame flow for the OF path (the emulation itself is
    // sensor-side work and is not part of the host feature-update timing)
    std::vector<std::vector<FlowVector>> flow(seq.frames.size());
    if (front_end == FrontEnd::kOpticalFlow) {
        if (seq.has_flow()) {
            for (size_t k = 0; k < seq.frames.size(); ++k) {
                const auto it = seq.of_records.find(seq.frames[k].frame_id);
                if (it != seq.of_records.end()) flow[k] = it->second;
            }
        } else {
            SensorEmulator emu(opt.sensor);
            for (size_t k = 0; k < seq.frames.size(); ++k)
                flow[k] = emu.process(seq.frames[k].image, seq.frames[k].frame_id).flow;
        }
    }

    TrackerConfig tracker_cfg;
    tracker_cfg.capacity = opt.tracker_capacity;
    tracker_cfg.camera = seq.manifest.camera;
    TrackerState tracker(tracker_cfg);
    HostFrontEnd host(opt.host);

    EstimatorConfig est_cfg = opt.estimator;
    est_cfg.preint.nominal_period = 1.0 / seq.manifest.imu_rate_hz;  // sequence rates rule
    SlidingWindow window(est_cfg, seq.manifest);
    const double imu_tol = 0.5 / seq.manifest.imu_rate_hz;

    OdometryResult result;
    result.feature_update_ms.reserve(seq.frames.size());

    for (size_t k = 0; k < seq.frames.size(); ++k) {
        const FrameRecord& frame = seq.frames[k];

        const auto t_update = std::chrono::steady_clock::now();
        if (front_end == FrontEnd::kHost) flow[k] = host.process(frame.image);
        if (k > 0) {
            const auto ingest = tracker.ingest_flow(frame.frame_id, flow[k]);
            tracker.admit_tracks(ingest.candidates);
        }
        const auto emitted = tracker.emit_feature_frame(frame.frame_id, est_cfg.decimation);
        result.feature_update_ms.push_back(odometry_detail::ms_since(t_update));

        if (frame.frame_id % est_cfg.decimation != 0) continue;

        // --- estimator tick ---
        WindowFrame wf;
        wf.frame_id = frame.frame_id;
        wf.t = frame.t;

        PreintDelta delta;
        std::vector<ImuSample> interval;
        if (!window.frames().empty()) {
            const double t_prev = window.frames().back().t;
            const auto [first, last] = imu_span(seq.imu, t_prev, frame.t, imu_tol);
            interval.assign(seq.imu.begin() + first, seq.imu.begin() + last + 1);
            delta = integrate(interval, window.bias(), est_cfg.preint);
        }

        if (window.frames().size() < 2) {
            wf.nav = odometry_detail::gt_state_at(seq.ground_truth, frame.t, opt.gt_match_tolerance);
        } else {
            wf.nav = predict(window.frames().back().nav, delta, seq.manifest.gravity_vector());
        }

        window.add_frame(wf, delta, std::move(interval));
        window.add_observations(frame.frame_id, emitted);
        window.triangulate_new_landmarks();

        const auto t_opt = std::chrono::steady_clock::now();
        const OptimizeReport report = window.optimize();
        const double opt_ms = odometry_detail::ms_since(t_opt);
        result.estimation_ms.push_back(opt_ms);

        if (static_cast<int>(window.frames().size()) > est_cfg.window_size) window.slide();

        const NavState& nav = window.frames().back().nav;
        GroundTruthPose out;
        out.t = frame.t;
        out.position = nav.p;
        out.orientation = nav.q;
        result.trajectory.push_back(out);
        result.diagnostics.push_back({frame.frame_id, frame.t, report.final_cost, report.iterations,
                                      report.landmarks,
                                      static_cast<int>(tracker.active().size()), opt_ms});
    }
    return result;
}

inline void write_diagnostics_csv(const std::vector<TickDiagnostic>& rows, const std::string& path) {
    CsvWriter csv(path, "frame_id,t,cost,iterations,landmarks,active_tracks,optimize_ms");
    for (const auto& d : rows)
        csv.write_row({std::to_string(d.frame_id), format_double(d.t), format_double(d.cost),
                       std::to_string(d.iterations), std::to_string(d.landmarks),
                       std::to_string(d.active_tracks), format_double(d.optimize_ms)});
}

}  // namespace ofvio
