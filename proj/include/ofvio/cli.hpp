#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ofvio/bench.hpp"
#include "ofvio/dataset.hpp"
#include "ofvio/eval.hpp"
#include "ofvio/odometry.hpp"
#include "ofvio/sensor_emu.hpp"
#include "ofvio/synth.hpp"
#include "ofvio/timing_model.hpp"

namespace ofvio {

namespace cli_detail {

inline std::shared_ptr<TrajectoryModel> make_trajectory(const std::string& name, double duration,
                                                        double z = 1.5) {
    const Vec3 center(0.0, 0.0, z);
    if (name == "stationary")
        return std::make_shared<PlanarTrajectory>(std::make_shared<PointPath>(center), 0.0, 0.0);
    if (name == "yaw")
        return std::make_shared<PlanarTrajectory>(std::make_shared<PointPath>(center), 0.0, 0.3);
    if (name == "circle") {
        const double omega = 2.0 * M_PI / 15.0;
        auto path = std::make_shared<CirclePath>(center, 1.5, omega, 0.0, 0.2, 10.0);
        return std::make_shared<PlanarTrajectory>(path, 0.0, omega);  // radial-facing yaw
    }
    if (name == "figure8") {
        auto path = std::make_shared<FigureEightPath>(center, 1.8, 1.2, 15.0, 0.2, 10.0);
        return std::make_shared<PlanarTrajectory>(path, 0.0, 2.0 * M_PI / 30.0);
    }
    if (name == "circle-figure8") {
        const double t_mid = 0.5 * duration;
        auto circle = std::make_shared<CirclePath>(center, 1.5, 2.0 * M_PI / 15.0, 0.0, 0.2, 10.0);
        auto fig8 = std::make_shared<FigureEightPath>(center, 1.8, 1.2, 15.0, 0.2, 10.0);
        auto path = std::make_shared<BlendedPath>(circle, fig8, t_mid - 2.5, t_mid + 2.5);
        return std::make_shared<PlanarTrajectory>(path, 0.0, 2.0 * M_PI / 30.0);
    }
    throw ValidationError("unknown trajectory '" + name +
                          "' (stationary|yaw|circle|figure8|circle-figure8)");
}

inline Trajectory result_to_trajectory(const std::vector<GroundTruthPose>& t) { return t; }

}  // namespace cli_detail

/// Builds a synthetic sequence the acceptance and bench flows can share.
inline Sequence make_synthetic_sequence(const std::string& trajectory_name, double duration,
                                        int width, int height, double fps, double imu_rate,
                                        int n_points, uint64_t seed, bool textured = true,
                                        double accel_noise_sd = 0.0, double gyro_noise_sd = 0.0) {
    const auto manifest = make_default_manifest(width, height, fps, imu_rate);
    SceneSpec scene = make_cylinder_scene(seed, n_points, 6.0, 0.0, 3.5, textured);
    SynthSpec spec;
    spec.duration = duration;
    spec.seed = seed;
    spec.noise.accel_sd = accel_noise_sd;
    spec.noise.gyro_sd = gyro_noise_sd;
    const auto trajectory = cli_detail::make_trajectory(trajectory_name, duration);
    return synthesize_sequence(scene, *trajectory, spec, manifest);
}

inline int cli_dispatch(const std::vector<std::string>& args) {
    CLI::App app{"On-sensor optical-flow VIO toolkit"};
    app.require_subcommand(1);

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "Synthesize a sequence (frames, IMU, ground truth)");
    std::string synth_out, synth_traj = "circle";
    double synth_duration = 10.0, synth_fps = 20.0, synth_imu = 1000.0;
    int synth_w = 320, synth_h = 240, synth_points = 1200;
    uint64_t synth_seed = 1;
    bool synth_flat = false;
    double synth_accel_noise = 0.0, synth_gyro_noise = 0.0;
    synth->add_option("--out", synth_out, "output sequence directory")->required();
    synth->add_option("--trajectory", synth_traj,
                      "stationary|yaw|circle|figure8|circle-figure8");
    synth->add_option("--duration", synth_duration, "seconds");
    synth->add_option("--fps", synth_fps, "camera rate, Hz");
    synth->add_option("--imu-rate", synth_imu, "IMU rate, Hz");
    synth->add_option("--width", synth_w);
    synth->add_option("--height", synth_h);
    synth->add_option("--points", synth_points, "scene landmark count");
    synth->add_option("--seed", synth_seed);
    synth->add_flag("--flat-background", synth_flat, "disable the wall texture");
    synth->add_option("--accel-noise", synth_accel_noise, "per-sample accel noise SD, m/s^2");
    synth->add_option("--gyro-noise", synth_gyro_noise, "per-sample gyro noise SD, rad/s");

    // --- emulate ---
    auto* emulate = app.add_subcommand("emulate", "Run the sensor emulator over a sequence");
    std::string emu_seq, emu_out = "flow.csv", emu_config;
    emulate->add_option("--seq", emu_seq, "sequence directory")->required();
    emulate->add_option("--out", emu_out, "flow CSV output path");
    emulate->add_option("--config", emu_config, "sensor config file (key-value)");

    // --- track ---
    auto* track = app.add_subcommand("track", "Build feature tracks from a flow stream");
    std::string track_seq, track_out = "tracks.csv";
    track->add_option("--seq", track_seq, "sequence directory with flow.csv")->required();
    track->add_option("--out", track_out, "track dump CSV path");

    // --- odometry ---
    auto* odo = app.add_subcommand("odometry", "Run the sliding-window estimator");
    std::string odo_seq, odo_front = "of", odo_out = "trajectory.txt", odo_diag, odo_config;
    odo->add_option("--seq", odo_seq, "sequence directory")->required();
    odo->add_option("--front-end", odo_front, "of|host");
    odo->add_option("--out", odo_out, "TUM trajectory output");
    odo->add_option("--diag", odo_diag, "per-tick diagnostics CSV");
    odo->add_option("--config", odo_config, "sensor config file for OF emulation");

    // --- eval ---
    auto* eval_cmd = app.add_subcommand("eval", "Align and score a trajectory against ground truth");
    std::string eval_est, eval_gt, eval_seq, eval_align = "sim3", eval_out, eval_svg,
                eval_subtraj_csv, eval_subtraj_svg;
    double eval_max_dt = 0.01, eval_prefix = 15.0;
    std::vector<double> eval_lengths;
    int eval_samples = 50;
    uint64_t eval_seed = 1;
    eval_cmd->add_option("--est", eval_est, "estimated trajectory (TUM)")->required();
    eval_cmd->add_option("--gt", eval_gt, "ground-truth trajectory (TUM)");
    eval_cmd->add_option("--seq", eval_seq, "sequence directory providing groundtruth.txt");
    eval_cmd->add_option("--alignment", eval_align, "sim3|pose-yaw|prefix");
    eval_cmd->add_option("--max-dt", eval_max_dt, "association tolerance, s");
    eval_cmd->add_option("--prefix-duration", eval_prefix, "prefix alignment span, s");
    eval_cmd->add_option("--lengths", eval_lengths, "sub-trajectory lengths, m");
    eval_cmd->add_option("--samples", eval_samples, "samples per length");
    eval_cmd->add_option("--seed", eval_seed);
    eval_cmd->add_option("--out", eval_out, "metrics JSON path");
    eval_cmd->add_option("--svg", eval_svg, "trajectory overlay SVG");
    eval_cmd->add_option("--subtraj-csv", eval_subtraj_csv, "per-length distribution CSV");
    eval_cmd->add_option("--subtraj-svg", eval_subtraj_svg, "per-length box-plot SVG");

    // --- bench ---
    auto* bench = app.add_subcommand("bench", "Benchmark both front-ends and the estimator");
    std::string bench_seq, bench_out = "timings.json", bench_svg, bench_config;
    int bench_reps = 3, bench_warmup = 10;
    bool bench_single = true;
    uint64_t bench_seed = 1;
    bench->add_option("--seq", bench_seq, "sequence directory")->required();
    bench->add_option("--reps", bench_reps, "repetitions per stage");
    bench->add_option("--warmup", bench_warmup, "leading samples excluded");
    bench->add_option("--out", bench_out, "timings JSON path");
    bench->add_option("--svg", bench_svg, "breakdown SVG path");
    bench->add_option("--config", bench_config, "sensor config file");
    bench->add_option("--seed", bench_seed, "seed (recorded in the output)");
    bench->add_flag("--single-thread,!--parallel", bench_single,
                    "sequential stage execution (default)");

    // --- latency-model ---
    auto* lat = app.add_subcommand("latency-model", "Analytical link latency and frame-rate model");
    int lat_w = 0, lat_h = 0, lat_vectors = -1, lat_n_vectors = -1;
    double lat_bitrate = 804e6;
    std::string lat_table, lat_format, lat_out;
    double lat_fu = -1.0, lat_fus = -1.0, lat_est = -1.0, lat_fps = 20.0, lat_rate = 10.0;
    lat->add_option("--width", lat_w, "image width, px");
    lat->add_option("--height", lat_h, "image height, px");
    lat->add_option("--vectors", lat_vectors, "flow-vector budget for OF tx latency");
    lat->add_option("--bitrate", lat_bitrate, "link rate, bits/s");
    lat->add_option("--table", lat_table, "frame_rates.csv path");
    lat->add_option("--format", lat_format, "table format column (QVGA|VGA|FULL)");
    lat->add_option("--n-vectors", lat_n_vectors, "table vector count column");
    lat->add_option("--feature-update-mean", lat_fu, "stage mean, ms");
    lat->add_option("--feature-update-send-mean", lat_fus, "stage mean, ms");
    lat->add_option("--estimation-mean", lat_est, "stage mean, ms");
    lat->add_option("--fps", lat_fps, "camera rate for the composition");
    lat->add_option("--estimator-rate", lat_rate, "estimator rate for the composition");
    lat->add_option("--out", lat_out, "JSON output path");

    std::vector<std::string> argv_like = args;
    try {
        std::vector<const char*> argv;
        argv.push_back("ofvio");
        for (const auto& a : argv_like) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return 1;
    }

    try {
        if (synth->parsed()) {
            const Sequence seq = make_synthetic_sequence(synth_traj, synth_duration, synth_w,
                                                         synth_h, synth_fps, synth_imu, synth_points,
                                                         synth_seed, !synth_flat, synth_accel_noise,
                                                         synth_gyro_noise);
            save_sequence(seq, synth_out);
            std::cout << "wrote " << seq.frames.size() << " frames, " << seq.imu.size()
                      << " IMU samples, " << seq.ground_truth.size() << " ground-truth poses to "
                      << synth_out << "\n";
        } else if (emulate->parsed()) {
            const Sequence seq = load_sequence(emu_seq);
            SensorConfig cfg = emu_config.empty() ? SensorConfig{} : load_sensor_config(emu_config);
            SensorEmulator emu(cfg);
            std::map<int64_t, std::vector<FlowVector>> records;
            double count_sum = 0.0;
            double threshold = cfg.threshold_init;
            for (const auto& f : seq.frames) {
                auto out = emu.process(f.image, f.frame_id);
                threshold = out.threshold;
                count_sum += out.descriptor_count;
                if (!out.flow.empty()) records[f.frame_id] = std::move(out.flow);
            }
            write_flow_csv(records, emu_out);
            std::cout << "emulated " << seq.frames.size() << " frames; mean descriptor count "
                      << count_sum / seq.frames.size() << ", last threshold " << threshold
                      << "; wrote " << emu_out << "\n";
        } else if (track->parsed()) {
            const Sequence seq = load_sequence(track_seq);
            if (!seq.has_flow()) throw ValidationError(track_seq + " has no flow.csv");
            TrackerConfig cfg;
            cfg.camera = seq.manifest.camera;
            TrackerState tracker(cfg, /*keep_history=*/true);
            for (const auto& f : seq.frames) {
                if (f.frame_id == seq.frames.front().frame_id) continue;
                const auto it = seq.of_records.find(f.frame_id);
                const auto ingest = tracker.ingest_flow(
                    f.frame_id, it == seq.of_records.end() ? std::vector<FlowVector>{} : it->second);
                tracker.admit_tracks(ingest.candidates);
            }
            tracker.dump_csv(track_out);
            std::cout << "tracked " << seq.frames.size() << " frames; " << tracker.active().size()
                      << " tracks active at the end; wrote " << track_out << "\n";
        } else if (odo->parsed()) {
            const Sequence seq = load_sequence(odo_seq);
            OdometryOptions opt;
            if (!odo_config.empty()) opt.sensor = load_sensor_config(odo_config);
            const auto result = run_odometry(seq, parse_front_end(odo_front), opt);
            save_tum(result.trajectory, odo_out);
            if (!odo_diag.empty()) write_diagnostics_csv(result.diagnostics, odo_diag);
            std::cout << "odometry (" << odo_front << "): " << result.trajectory.size()
                      << " poses written to " << odo_out << "\n";
        } else if (eval_cmd->parsed()) {
            const Trajectory est = load_tum(eval_est);
            Trajectory gt;
            if (!eval_gt.empty()) gt = load_tum(eval_gt);
            else if (!eval_seq.empty()) gt = load_sequence(eval_seq).ground_truth;
            else throw ValidationError("eval: provide --gt or --seq");

            AlignmentResult alignment;
            if (eval_align == "sim3") alignment = align_sim3(associate(est, gt, eval_max_dt));
            else if (eval_align == "pose-yaw") alignment = align_pose_yaw(associate(est, gt, eval_max_dt));
            else if (eval_align == "prefix") alignment = align_prefix(est, gt, eval_prefix, eval_max_dt);
            else throw ValidationError("eval: unknown alignment '" + eval_align + "'");

            const Trajectory aligned = apply_alignment(alignment, est);
            const auto pairs = associate(aligned, gt, eval_max_dt);
            const auto [rmse, sd] = ate_rmse(pairs);
            std::cout << "alignment: " << eval_align << "  scale " << alignment.scale << "\n"
                      << "ATE RMSE " << rmse << " m  (SD " << sd << " m) over " << pairs.size()
                      << " pairs\n";

            nlohmann::json j;
            j["alignment"] = eval_align;
            j["scale"] = alignment.scale;
            j["rmse_m"] = rmse;
            j["sd_m"] = sd;
            j["pairs"] = pairs.size();
            std::vector<SubTrajStats> stats;
            if (!eval_lengths.empty()) {
                stats = subtrajectory_errors(aligned, gt, eval_lengths, eval_samples, eval_seed,
                                             eval_max_dt);
                for (const auto& s : stats) {
                    j["subtrajectories"].push_back({{"length_m", s.length_m},
                                                    {"trans_median_m", s.trans_median},
                                                    {"trans_q25_m", s.trans_q25},
                                                    {"trans_q75_m", s.trans_q75},
                                                    {"rot_median_deg", s.rot_median_deg},
                                                    {"rot_q25_deg", s.rot_q25_deg},
                                                    {"rot_q75_deg", s.rot_q75_deg}});
                    std::cout << "subtraj " << s.length_m << " m: trans median " << s.trans_median
                              << " m, rot median " << s.rot_median_deg << " deg\n";
                }
            }
            if (!eval_out.empty()) std::ofstream(eval_out) << j.dump(2) << "\n";
            if (!eval_svg.empty())
                write_trajectory_svg({{"ground truth", gt}, {"estimate (aligned)", aligned}},
                                     eval_svg);
            if (!eval_subtraj_csv.empty()) {
                CsvWriter csv(eval_subtraj_csv,
                              "length_m,trans_median,trans_q25,trans_q75,trans_max,"
                              "rot_median_deg,rot_q25_deg,rot_q75_deg,rot_max_deg");
                for (const auto& s : stats)
                    csv.write_row({format_double(s.length_m), format_double(s.trans_median),
                                   format_double(s.trans_q25), format_double(s.trans_q75),
                                   format_double(s.trans_max), format_double(s.rot_median_deg),
                                   format_double(s.rot_q25_deg), format_double(s.rot_q75_deg),
                                   format_double(s.rot_max_deg)});
            }
            if (!eval_subtraj_svg.empty()) write_subtraj_svg(stats, eval_subtraj_svg);
        } else if (bench->parsed()) {
            const Sequence seq = load_sequence(bench_seq);
            BenchOptions opt;
            opt.repetitions = bench_reps;
            opt.warmup = bench_warmup;
            opt.single_thread = bench_single;
            if (!bench_config.empty()) opt.odometry.sensor = load_sensor_config(bench_config);
            const BenchResult r = bench_frontends(seq, opt);
            std::cout << "# " << r.note << "\n";
            for (const auto* s : {&r.of_feature_update, &r.host_front_end, &r.estimation})
                std::cout << s->name << ": mean " << to_sig_figs(s->mean(), 3) << " ms, sd "
                          << to_sig_figs(s->sd(), 3) << ", min " << to_sig_figs(s->min(), 3)
                          << ", max " << to_sig_figs(s->max(), 3) << " ("
                          << s->samples_ms.size() << " samples)\n";
            std::cout << "front-end speedup (host/of): "
                      << to_sig_figs(r.host_front_end.mean() /
                                         std::max(1e-9, r.of_feature_update.mean()), 3)
                      << "x\n";
            if (r.overhead_flagged)
                std::cout << "warning: harness overhead " << r.overhead_ms
                          << " ms is not negligible against the smallest stage\n";
            std::ofstream(bench_out) << bench_to_json(r, opt).dump(2) << "\n";
            if (!bench_svg.empty())
                write_breakdown_svg(
                    {{"OF front-end", r.of_breakdown}, {"host front-end", r.host_breakdown}},
                    bench_svg);
        } else if (lat->parsed()) {
            LinkConfig link;
            link.bitrate = lat_bitrate;
            nlohmann::json j;
            if (lat_w > 0 || lat_h > 0) {
                const double ms = image_tx_latency(lat_w, lat_h, link) * 1e3;
                std::cout << "image transmission (" << lat_w << "x" << lat_h << "): "
                          << to_sig_figs(ms, 3) << " ms\n";
                j["image_tx_ms"] = ms;
            }
            if (lat_vectors >= 0) {
                const double ms = flow_tx_latency(lat_vectors, link) * 1e3;
                std::cout << "OF transmission (" << lat_vectors << " vectors): "
                          << to_sig_figs(ms, 2) << " ms\n";
                j["of_tx_ms"] = ms;
            }
            if (!lat_table.empty()) {
                if (lat_format.empty() || lat_n_vectors < 0)
                    throw ValidationError("latency-model: --table needs --format and --n-vectors");
                const auto table = FrameRateTable::load(lat_table);
                const double fps = table.max_frame_rate(lat_format, lat_n_vectors);
                std::cout << "max frame rate (" << lat_format << ", " << lat_n_vectors
                          << " vectors): " << fps << " Hz\n";
                j["max_frame_rate_hz"] = fps;
            }
            if (lat_fu >= 0 && lat_est >= 0) {
                const double send = lat_fus >= 0 ? lat_fus : lat_fu;
                const double img_ms = (lat_w > 0 && lat_h > 0)
                                          ? image_tx_latency(lat_w, lat_h, link) * 1e3
                                          : 0.0;
                const double of_ms = lat_vectors >= 0 ? flow_tx_latency(lat_vectors, link) * 1e3 : 0.0;
                const auto b = compose_breakdown(constant_stage("feature_update", lat_fu),
                                                 constant_stage("feature_update_send", send),
                                                 constant_stage("estimation", lat_est), img_ms,
                                                 of_ms, lat_fps, lat_rate);
                std::cout << "per-odometry-estimate: " << to_sig_figs(b.per_estimate_ms, 4)
                          << " ms (with send cost: " << to_sig_figs(b.per_estimate_with_send_ms, 4)
                          << " ms); end-to-end " << to_sig_figs(b.end_to_end_ms, 4) << " ms\n";
                j["breakdown"] = breakdown_to_json(b);
            }
            if (j.empty()) throw ValidationError("latency-model: nothing to compute; see --help");
            if (!lat_out.empty()) std::ofstream(lat_out) << j.dump(2) << "\n";
        }
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace ofvio
