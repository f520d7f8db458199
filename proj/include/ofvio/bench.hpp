#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ofvio/odometry.hpp"
#include "ofvio/timing_model.hpp"

namespace ofvio {

/// Wall-clock samples of one pipeline stage; statistics are always recomputed
/// from the raw samples, which are persisted alongside them.
struct StageTiming {
    std::string name;
    std::vector<double> samples_ms;

    double mean() const {
        double s = 0.0;
        for (double v : samples_ms) s += v;
        return samples_ms.empty() ? 0.0 : s / samples_ms.size();
    }
    double sd() const {
        if (samples_ms.size() < 2) return 0.0;
        const double m = mean();
        double s = 0.0;
        for (double v : samples_ms) s += (v - m) * (v - m);
        return std::sqrt(s / (samples_ms.size() - 1));
    }
    double min() const {
        return samples_ms.empty() ? 0.0 : *std::min_element(samples_ms.begin(), samples_ms.end());
    }
    double max() const {
        return samples_ms.empty() ? 0.0 : *std::max_element(samples_ms.begin(), samples_ms.end());
    }

    StageStats stats() const { return {name, mean(), sd(), min(), max()}; }

    /// Drops warm-up samples, always keeping at least one.
    void drop_warmup(int warmup) {
        const size_t drop = std::min<size_t>(warmup, samples_ms.empty() ? 0 : samples_ms.size() - 1);
        samples_ms.erase(samples_ms.begin(), samples_ms.begin() + drop);
    }
};

struct BenchOptions {
    int repetitions = 3;
    int warmup = 10;            // leading samples excluded per stage
    bool single_thread = true;  // the harness is sequential; recorded for the output
    OdometryOptions odometry;
};

struct BenchResult {
    StageTiming of_feature_update;    // track update on precomputed flow vectors
    StageTiming host_front_end;       // detection + tracking + RANSAC + track update
    StageTiming estimation;           // one optimizer tick
    double overhead_ms = 0.0;         // empty-stage measurement cost
    bool overhead_flagged = false;    // overhead >= 1% of the smallest stage mean
    LatencyBreakdown of_breakdown;
    LatencyBreakdown host_breakdown;
    std::string note;
};

namespace bench_detail {

inline double ms_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline double measure_overhead() {
    std::vector<double> samples(1000);
    for (auto& s : samples) {
        const auto t0 = std::chrono::steady_clock::now();
        s = ms_since(t0);
    }
    std::nth_element(samples.begin(), samples.begin() + samples.size() / 2, samples.end());
    return samples[samples.size() / 2];
}

}  // namespace bench_detail

/// Times the two front-end paths plus the estimator tick over the sequence,
/// then composes Table-style breakdowns through the analytical link model.
/// Only compute stages are measured; there is no middleware publish cost here.
inline BenchResult bench_frontends(const Sequence& seq, const BenchOptions& opt = {}) {
    if (opt.repetitions <= 0)
        throw std::invalid_argument("bench_frontends: repetitions must be >= 1");
    if (seq.frames.empty())
        throw std::invalid_argument("bench_frontends: host path requires frames, none present");

    Sequence work = seq;
    if (!work.has_flow()) {
        // OF path input: emulate once, untimed (this is the sensor's job)
        SensorEmulator emu(opt.odometry.sensor);
        for (const auto& f : work.frames)
            work.of_records[f.frame_id] = emu.process(f.image, f.frame_id).flow;
    }
    if (!work.has_flow())
        throw std::invalid_argument("bench_frontends: of path requires flow vectors, none produced");

    BenchResult result;
    result.note =
        "compute stages only; middleware publish costs of the reference pipeline have no analogue "
        "here, so the with-send feature update equals the plain one";
    result.of_feature_update.name = "of_feature_update";
    result.host_front_end.name = "host_front_end";
    result.estimation.name = "estimation";

    TrackerConfig tracker_cfg;
    tracker_cfg.capacity = opt.odometry.tracker_capacity;
    tracker_cfg.camera = work.manifest.camera;

    for (int rep = 0; rep < opt.repetitions; ++rep) {
        TrackerState tracker(tracker_cfg);
        for (const auto& f : work.frames) {
            const auto& flow = work.of_records.count(f.frame_id) ? work.of_records[f.frame_id]
                                                                 : std::vector<FlowVector>{};
            const auto t0 = std::chrono::steady_clock::now();
            if (f.frame_id != work.frames.front().frame_id) {
                const auto ingest = tracker.ingest_flow(f.frame_id, flow);
                tracker.admit_tracks(ingest.candidates);
            }
            tracker.emit_feature_frame(f.frame_id, opt.odometry.estimator.decimation);
            result.of_feature_update.samples_ms.push_back(bench_detail::ms_since(t0));
        }
    }

    for (int rep = 0; rep < opt.repetitions; ++rep) {
        TrackerState tracker(tracker_cfg);
        HostFrontEnd host(opt.odometry.host);
        for (const auto& f : work.frames) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto flow = host.process(f.image);
            if (f.frame_id != work.frames.front().frame_id) {
                const auto ingest = tracker.ingest_flow(f.frame_id, flow);
                tracker.admit_tracks(ingest.candidates);
            }
            tracker.emit_feature_frame(f.frame_id, opt.odometry.estimator.decimation);
            result.host_front_end.samples_ms.push_back(bench_detail::ms_since(t0));
        }
    }

    if (work.has_ground_truth()) {
        for (int rep = 0; rep < opt.repetitions; ++rep) {
            const auto run = run_odometry(work, FrontEnd::kOpticalFlow, opt.odometry);
            result.estimation.samples_ms.insert(result.estimation.samples_ms.end(),
                                                run.estimation_ms.begin(), run.estimation_ms.end());
        }
    } else {
        result.estimation.samples_ms.push_back(0.0);
        result.note += "; no ground truth in the sequence, estimation stage not measured";
    }

    result.of_feature_update.drop_warmup(opt.warmup);
    result.host_front_end.drop_warmup(opt.warmup);
    result.estimation.drop_warmup(opt.warmup);

    result.overhead_ms = bench_detail::measure_overhead();
    const double smallest =
        std::min({result.of_feature_update.mean(), result.host_front_end.mean(),
                  result.estimation.mean()});
    result.overhead_flagged = smallest > 0.0 && result.overhead_ms >= 0.01 * smallest;

    const int width = work.frames.front().image.width();
    const int height = work.frames.front().image.height();
    const double image_tx_ms = image_tx_latency(width, height) * 1e3;
    const double of_tx_ms = flow_tx_latency(opt.odometry.sensor.max_descriptors) * 1e3;
    const double fps = work.manifest.frame_rate_hz;
    const double est_rate = fps / opt.odometry.estimator.decimation;

    StageStats of_stats = result.of_feature_update.stats();
    of_stats.name = "feature_update";
    StageStats host_stats = result.host_front_end.stats();
    host_stats.name = "feature_update";
    StageStats est_stats = result.estimation.stats();
    est_stats.name = "estimation";

    result.of_breakdown =
        compose_breakdown(of_stats, of_stats, est_stats, image_tx_ms, of_tx_ms, fps, est_rate);
    result.host_breakdown =
        compose_breakdown(host_stats, host_stats, est_stats, image_tx_ms, 0.0, fps, est_rate);
    return result;
}

inline nlohmann::json bench_to_json(const BenchResult& r, const BenchOptions& opt) {
    nlohmann::json j;
    j["note"] = r.note;
    j["single_thread"] = opt.single_thread;
    j["repetitions"] = opt.repetitions;
    j["warmup_excluded"] = opt.warmup;
    j["overhead_ms"] = r.overhead_ms;
    j["overhead_flagged"] = r.overhead_flagged;
    for (const auto* stage : {&r.of_feature_update, &r.host_front_end, &r.estimation}) {
        nlohmann::json s;
        s["mean_ms"] = stage->mean();
        s["sd_ms"] = stage->sd();
        s["min_ms"] = stage->min();
        s["max_ms"] = stage->max();
        s["count"] = stage->samples_ms.size();
        s["samples_ms"] = stage->samples_ms;
        j["stages"][stage->name] = s;
    }
    j["of_breakdown"] = breakdown_to_json(r.of_breakdown);
    j["host_breakdown"] = breakdown_to_json(r.host_breakdown);
    return j;
}

}  // namespace ofvio
