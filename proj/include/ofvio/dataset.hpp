#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ofvio/csv.hpp"
#include "ofvio/types.hpp"

namespace ofvio {

/// Input-data problem (bad file, broken invariant). The CLI maps this to exit code 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace fs = std::filesystem;

// Sequence directory layout:
//   manifest.txt        key-value calibration and rates
//   frames.csv          frame_id,t,filename
//   frames/*.pgm        8-bit binary PGM (P5)
//   imu.csv             t,ax,ay,az,gx,gy,gz
//   flow.csv            optional; frame_id,x_prev,y_prev,x_curr,y_curr,hamming,cornerness
//   groundtruth.txt     optional; TUM format t tx ty tz qx qy qz qw

// --- TUM trajectory I/O ---

inline std::vector<GroundTruthPose> load_tum(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open trajectory file " + path);
    std::vector<GroundTruthPose> out;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        GroundTruthPose g;
        double qx, qy, qz, qw;
        if (!(ss >> g.t >> g.position.x() >> g.position.y() >> g.position.z() >> qx >> qy >> qz >> qw))
            throw ValidationError(path + ":" + std::to_string(line_no) + ": malformed TUM row");
        g.orientation = Quat(qw, qx, qy, qz);
        const double norm_err = std::abs(g.orientation.norm() - 1.0);
        if (norm_err > 1e-3)
            throw ValidationError(path + ":" + std::to_string(line_no) + ": quaternion norm off by " +
                                  std::to_string(norm_err));
        if (norm_err > 1e-12) g.orientation.normalize();
        out.push_back(g);
    }
    return out;
}

inline void save_tum(const std::vector<GroundTruthPose>& traj, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& g : traj) {
        f << format_double(g.t) << ' ' << format_double(g.position.x()) << ' '
          << format_double(g.position.y()) << ' ' << format_double(g.position.z()) << ' '
          << format_double(g.orientation.x()) << ' ' << format_double(g.orientation.y()) << ' '
          << format_double(g.orientation.z()) << ' ' << format_double(g.orientation.w()) << '\n';
    }
}

// --- Manifest I/O ---

inline SequenceManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("missing manifest: " + path);
    SequenceManifest m;
    bool have_fx = false, have_fy = false, have_frame_rate = false, have_imu_rate = false;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        double value;
        if (!(ss >> key >> value))
            throw ValidationError(path + ":" + std::to_string(line_no) + ": malformed manifest line");
        if (key == "fx") { m.camera.fx = value; have_fx = true; }
        else if (key == "fy") { m.camera.fy = value; have_fy = true; }
        else if (key == "cx") m.camera.cx = value;
        else if (key == "cy") m.camera.cy = value;
        else if (key == "k1") m.camera.k1 = value;
        else if (key == "k2") m.camera.k2 = value;
        else if (key == "p1") m.camera.p1 = value;
        else if (key == "p2") m.camera.p2 = value;
        else if (key == "width") m.width = static_cast<int>(value);
        else if (key == "height") m.height = static_cast<int>(value);
        else if (key == "frame_rate_hz") { m.frame_rate_hz = value; have_frame_rate = true; }
        else if (key == "imu_rate_hz") { m.imu_rate_hz = value; have_imu_rate = true; }
        else if (key == "gravity") m.gravity = value;
        else if (key == "q_bc_w") m.q_bc.w() = value;
        else if (key == "q_bc_x") m.q_bc.x() = value;
        else if (key == "q_bc_y") m.q_bc.y() = value;
        else if (key == "q_bc_z") m.q_bc.z() = value;
        else if (key == "p_bc_x") m.p_bc.x() = value;
        else if (key == "p_bc_y") m.p_bc.y() = value;
        else if (key == "p_bc_z") m.p_bc.z() = value;
        else if (key == "accel_noise_density") m.accel_noise_density = value;
        else if (key == "gyro_noise_density") m.gyro_noise_density = value;
        else
            std::cerr << "warning: " << path << ":" << line_no << ": unknown manifest key '" << key
                      << "'\n";
    }
    if (!have_fx || !have_fy || !have_frame_rate || !have_imu_rate)
        throw ValidationError(path + ": manifest must define fx, fy, frame_rate_hz, imu_rate_hz");
    if (m.frame_rate_hz <= 0) throw ValidationError(path + ": frame_rate_hz must be > 0");
    if (m.imu_rate_hz < m.frame_rate_hz)
        throw ValidationError(path + ": imu_rate_hz must be >= frame_rate_hz");
    if (!m.camera.valid()) throw ValidationError(path + ": fx and fy must be > 0");
    m.q_bc.normalize();
    return m;
}

inline void save_manifest(const SequenceManifest& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    auto kv = [&](const char* key, double value) { f << key << ' ' << format_double(value) << '\n'; };
    kv("fx", m.camera.fx); kv("fy", m.camera.fy); kv("cx", m.camera.cx); kv("cy", m.camera.cy);
    kv("k1", m.camera.k1); kv("k2", m.camera.k2); kv("p1", m.camera.p1); kv("p2", m.camera.p2);
    kv("width", m.width); kv("height", m.height);
    kv("frame_rate_hz", m.frame_rate_hz);
    kv("imu_rate_hz", m.imu_rate_hz);
    kv("gravity", m.gravity);
    kv("q_bc_w", m.q_bc.w()); kv("q_bc_x", m.q_bc.x()); kv("q_bc_y", m.q_bc.y()); kv("q_bc_z", m.q_bc.z());
    kv("p_bc_x", m.p_bc.x()); kv("p_bc_y", m.p_bc.y()); kv("p_bc_z", m.p_bc.z());
    kv("accel_noise_density", m.accel_noise_density);
    kv("gyro_noise_density", m.gyro_noise_density);
}

// --- Sequence validation ---

namespace detail {
template <typename Container, typename Get>
inline void check_strictly_increasing(const Container& c, Get get, const std::string& what) {
    std::string offenders;
    int count = 0;
    for (size_t i = 1; i < c.size(); ++i) {
        if (!(get(c[i - 1]) < get(c[i]))) {
            if (count++) offenders += ", ";
            offenders += std::to_string(i);
            if (count >= 10) { offenders += ", ..."; break; }
        }
    }
    if (count) throw ValidationError(what + " not strictly increasing at indices: " + offenders);
}
}  // namespace detail

inline void validate_sequence(const Sequence& seq) {
    detail::check_strictly_increasing(seq.imu, [](const ImuSample& s) { return s.t; }, "IMU timestamps");
    detail::check_strictly_increasing(seq.frames, [](const FrameRecord& f) { return f.t; },
                                      "frame timestamps");
    detail::check_strictly_increasing(seq.frames, [](const FrameRecord& f) { return f.frame_id; },
                                      "frame ids");
    detail::check_strictly_increasing(seq.ground_truth, [](const GroundTruthPose& g) { return g.t; },
                                      "ground-truth timestamps");
    for (const auto& s : seq.imu)
        if (!s.accel.allFinite() || !s.gyro.allFinite() || !std::isfinite(s.t))
            throw ValidationError("non-finite IMU sample at t=" + std::to_string(s.t));
    if (!seq.frames.empty() && !seq.imu.empty()) {
        // preintegration between any two frames needs IMU coverage
        if (seq.frames.front().t < seq.imu.front().t || seq.frames.back().t > seq.imu.back().t)
            throw ValidationError("frame timestamps extend outside the IMU timestamp span");
    }
}

// --- Sequence I/O ---

inline Sequence load_sequence(const std::string& directory) {
    const fs::path dir(directory);
    if (!fs::exists(dir)) throw ValidationError("sequence directory does not exist: " + directory);

    Sequence seq;
    seq.manifest = load_manifest((dir / "manifest.txt").string());

    {
        CsvReader frames_csv((dir / "frames.csv").string(), "frame_id,t,filename");
        CsvRow row;
        while (frames_csv.next(row)) {
            frames_csv.expect_fields(row, 3);
            FrameRecord rec;
            rec.frame_id = frames_csv.parse_int(row, 0);
            rec.t = frames_csv.parse_double(row, 1);
            rec.image = load_pgm((dir / "frames" / row[2]).string());
            seq.frames.push_back(std::move(rec));
        }
    }
    if (seq.frames.empty()) throw ValidationError(directory + ": no frames listed in frames.csv");

    {
        CsvReader imu_csv((dir / "imu.csv").string(), "t,ax,ay,az,gx,gy,gz");
        CsvRow row;
        while (imu_csv.next(row)) {
            imu_csv.expect_fields(row, 7);
            ImuSample s;
            s.t = imu_csv.parse_double(row, 0);
            s.accel = Vec3(imu_csv.parse_double(row, 1), imu_csv.parse_double(row, 2),
                           imu_csv.parse_double(row, 3));
            s.gyro = Vec3(imu_csv.parse_double(row, 4), imu_csv.parse_double(row, 5),
                          imu_csv.parse_double(row, 6));
            seq.imu.push_back(s);
        }
    }

    if (fs::exists(dir / "flow.csv")) {
        CsvReader flow_csv((dir / "flow.csv").string(),
                           "frame_id,x_prev,y_prev,x_curr,y_curr,hamming,cornerness");
        CsvRow row;
        while (flow_csv.next(row)) {
            flow_csv.expect_fields(row, 7);
            const int64_t frame_id = flow_csv.parse_int(row, 0);
            FlowVector fv;
            fv.prev = Vec2(flow_csv.parse_double(row, 1), flow_csv.parse_double(row, 2));
            fv.curr = Vec2(flow_csv.parse_double(row, 3), flow_csv.parse_double(row, 4));
            fv.hamming = static_cast<int>(flow_csv.parse_int(row, 5));
            fv.cornerness = flow_csv.parse_double(row, 6);
            seq.of_records[frame_id].push_back(fv);
        }
    }

    if (fs::exists(dir / "groundtruth.txt"))
        seq.ground_truth = load_tum((dir / "groundtruth.txt").string());

    validate_sequence(seq);
    return seq;
}

inline void write_flow_csv(const std::map<int64_t, std::vector<FlowVector>>& records,
                           const std::string& path) {
    CsvWriter flow_csv(path, "frame_id,x_prev,y_prev,x_curr,y_curr,hamming,cornerness");
    for (const auto& [frame_id, fvs] : records)
        for (const auto& fv : fvs)
            flow_csv.write_row({std::to_string(frame_id), format_double(fv.prev.x()),
                                format_double(fv.prev.y()), format_double(fv.curr.x()),
                                format_double(fv.curr.y()), std::to_string(fv.hamming),
                                format_double(fv.cornerness)});
}

inline void save_sequence(const Sequence& seq, const std::string& directory) {
    const fs::path dir(directory);
    fs::create_directories(dir / "frames");
    save_manifest(seq.manifest, (dir / "manifest.txt").string());

    {
        CsvWriter frames_csv((dir / "frames.csv").string(), "frame_id,t,filename");
        for (const auto& f : seq.frames) {
            char name[32];
            std::snprintf(name, sizeof(name), "frame_%06lld.pgm", static_cast<long long>(f.frame_id));
            save_pgm(f.image, (dir / "frames" / name).string());
            frames_csv.write_row({std::to_string(f.frame_id), format_double(f.t), name});
        }
    }
    {
        CsvWriter imu_csv((dir / "imu.csv").string(), "t,ax,ay,az,gx,gy,gz");
        for (const auto& s : seq.imu)
            imu_csv.write_row({format_double(s.t), format_double(s.accel.x()),
                               format_double(s.accel.y()), format_double(s.accel.z()),
                               format_double(s.gyro.x()), format_double(s.gyro.y()),
                               format_double(s.gyro.z())});
    }
    if (!seq.of_records.empty()) write_flow_csv(seq.of_records, (dir / "flow.csv").string());
    if (!seq.ground_truth.empty()) save_tum(seq.ground_truth, (dir / "groundtruth.txt").string());
}

}  // namespace ofvio
