#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ofvio/csv.hpp"

namespace ofvio {

/// MIPI CSI-2 link parameters.
struct LinkConfig {
    double bitrate = 804e6;         // bits/s
    int bits_per_pixel = 8;
    int bytes_per_flow_vector = 8;

    void validate() const {
        if (bitrate <= 0 || bits_per_pixel <= 0 || bytes_per_flow_vector <= 0)
            throw std::invalid_argument("LinkConfig: all fields must be > 0");
    }
};

/// Image transmission time in seconds.
inline double image_tx_latency(int width, int height, const LinkConfig& link = {}) {
    link.validate();
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("image_tx_latency: width and height must be > 0");
    return static_cast<double>(width) * height * link.bits_per_pixel / link.bitrate;
}

/// Worst-case transmission time for max_vectors flow vectors, seconds.
inline double flow_tx_latency(int max_vectors, const LinkConfig& link = {}) {
    link.validate();
    if (max_vectors < 0) throw std::invalid_argument("flow_tx_latency: max_vectors must be >= 0");
    return static_cast<double>(max_vectors) * link.bytes_per_flow_vector * 8 / link.bitrate;
}

/// Rounds to the given number of significant figures (display only).
inline double to_sig_figs(double v, int figs) {
    if (v == 0.0) return 0.0;
    const double mag = std::pow(10.0, figs - 1 - static_cast<int>(std::floor(std::log10(std::abs(v)))));
    return std::round(v * mag) / mag;
}

// --- Measured frame-rate table (exact lookup, no interpolation) ---

struct FrameRateRow {
    std::string format;
    int frame_height = 0;
    int n_of_vectors = 0;
    double frame_rate_hz = 0.0;
};

class FrameRateTable {
  public:
    FrameRateTable() = default;
    explicit FrameRateTable(std::vector<FrameRateRow> rows) : rows_(std::move(rows)) {}

    static FrameRateTable load(const std::string& path) {
        CsvReader csv(path, "format,height,n_vectors,fps");
        std::vector<FrameRateRow> rows;
        CsvRow row;
        while (csv.next(row)) {
            csv.expect_fields(row, 4);
            FrameRateRow r;
            r.format = row[0];
            r.frame_height = static_cast<int>(csv.parse_int(row, 1));
            r.n_of_vectors = static_cast<int>(csv.parse_int(row, 2));
            r.frame_rate_hz = csv.parse_double(row, 3);
            rows.push_back(r);
        }
        return FrameRateTable(std::move(rows));
    }

    const std::vector<FrameRateRow>& rows() const { return rows_; }

    double max_frame_rate(const std::string& format, int n_vectors) const {
        for (const auto& r : rows_)
            if (r.format == format && r.n_of_vectors == n_vectors) return r.frame_rate_hz;
        // not configured: point at the nearest rows of the same format
        std::string advice;
        std::vector<FrameRateRow> same;
        for (const auto& r : rows_)
            if (r.format == format) same.push_back(r);
        if (same.empty()) {
            advice = "no rows for format '" + format + "'; configured formats:";
            std::vector<std::string> seen;
            for (const auto& r : rows_)
                if (std::find(seen.begin(), seen.end(), r.format) == seen.end()) {
                    seen.push_back(r.format);
                    advice += " " + r.format;
                }
        } else {
            std::sort(same.begin(), same.end(), [&](const FrameRateRow& a, const FrameRateRow& b) {
                return std::abs(a.n_of_vectors - n_vectors) < std::abs(b.n_of_vectors - n_vectors);
            });
            advice = "nearest configured rows: ";
            for (size_t i = 0; i < std::min<size_t>(2, same.size()); ++i) {
                if (i) advice += ", ";
                advice += same[i].format + "/" + std::to_string(same[i].n_of_vectors) + " vectors -> " +
                          std::to_string(same[i].frame_rate_hz) + " Hz";
            }
        }
        throw std::invalid_argument("max_frame_rate: no row for (" + format + ", " +
                                    std::to_string(n_vectors) + " vectors); " + advice);
    }

  private:
    std::vector<FrameRateRow> rows_;
};

// --- Latency breakdown composition ---

struct StageStats {
    std::string name;
    double mean_ms = 0.0;
    double sd_ms = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;

    void validate() const {
        if (!(min_ms <= mean_ms && mean_ms <= max_ms))
            throw std::invalid_argument("StageStats(" + name + "): need min <= mean <= max");
        if (sd_ms < 0.0) throw std::invalid_argument("StageStats(" + name + "): SD must be >= 0");
    }
};

inline StageStats constant_stage(const std::string& name, double ms) {
    return StageStats{name, ms, 0.0, ms, ms};
}

/// End-to-end and per-odometry-estimate latency composition.
///
/// per_estimate_ms follows (camera fps / estimator rate) feature updates plus one
/// estimation; per_estimate_with_send_ms counts one of those updates at its
/// with-send cost, which is how the reference pipeline's per-estimate figures
/// combine. Both are reported because the composition of the published numbers
/// is ambiguous between them.
struct LatencyBreakdown {
    std::vector<StageStats> stages;  // image_tx, of_tx, feature_update, feature_update_send, estimation
    double end_to_end_ms = 0.0;          // image tx + OF tx + feature update (send variant) + estimation
    double per_estimate_ms = 0.0;
    double per_estimate_with_send_ms = 0.0;
    double camera_fps = 0.0;
    double estimator_rate_hz = 0.0;

    const StageStats& stage(const std::string& name) const {
        for (const auto& s : stages)
            if (s.name == name) return s;
        throw std::invalid_argument("LatencyBreakdown: no stage named " + name);
    }
};

inline LatencyBreakdown compose_breakdown(const StageStats& feature_update,
                                          const StageStats& feature_update_send,
                                          const StageStats& estimation, double image_tx_ms,
                                          double of_tx_ms, double camera_fps,
                                          double estimator_rate_hz) {
    feature_update.validate();
    feature_update_send.validate();
    estimation.validate();
    if (camera_fps <= 0 || estimator_rate_hz <= 0)
        throw std::invalid_argument("compose_breakdown: rates must be > 0");
    const double ratio = camera_fps / estimator_rate_hz;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
        throw std::invalid_argument("compose_breakdown: estimator rate must divide camera fps");
    const double updates_per_estimate = std::round(ratio);

    LatencyBreakdown b;
    b.camera_fps = camera_fps;
    b.estimator_rate_hz = estimator_rate_hz;
    b.stages.push_back(constant_stage("image_tx", image_tx_ms));
    b.stages.push_back(constant_stage("of_tx", of_tx_ms));
    b.stages.push_back(feature_update);
    b.stages.back().name = "feature_update";
    b.stages.push_back(feature_update_send);
    b.stages.back().name = "feature_update_send";
    b.stages.push_back(estimation);
    b.stages.back().name = "estimation";

    b.per_estimate_ms = updates_per_estimate * feature_update.mean_ms + estimation.mean_ms;
    b.per_estimate_with_send_ms = (updates_per_estimate - 1.0) * feature_update.mean_ms +
                                  feature_update_send.mean_ms + estimation.mean_ms;
    b.end_to_end_ms = image_tx_ms + of_tx_ms + feature_update_send.mean_ms + estimation.mean_ms;
    return b;
}

inline nlohmann::json breakdown_to_json(const LatencyBreakdown& b) {
    nlohmann::json j;
    j["camera_fps"] = b.camera_fps;
    j["estimator_rate_hz"] = b.estimator_rate_hz;
    j["end_to_end_ms"] = b.end_to_end_ms;
    j["per_estimate_ms"] = b.per_estimate_ms;
    j["per_estimate_with_send_ms"] = b.per_estimate_with_send_ms;
    for (const auto& s : b.stages)
        j["stages"][s.name] = {{"mean_ms", s.mean_ms},
                               {"sd_ms", s.sd_ms},
                               {"min_ms", s.min_ms},
                               {"max_ms", s.max_ms}};
    return j;
}

/// Stacked horizontal bars of the per-estimate critical path, one bar per breakdown.
inline void write_breakdown_svg(const std::vector<std::pair<std::string, LatencyBreakdown>>& items,
                                const std::string& path) {
    if (items.empty()) throw std::invalid_argument("write_breakdown_svg: nothing to draw");
    static const char* kColors[] = {"#4878d0", "#ee854a", "#6acc64", "#d65f5f", "#956cb4"};
    double max_total = 0.0;
    for (const auto& [label, b] : items) max_total = std::max(max_total, b.end_to_end_ms);
    if (max_total <= 0.0) max_total = 1.0;

    const int bar_h = 36, gap = 26, left = 150, width_px = 640, top = 40;
    const int height = top + static_cast<int>(items.size()) * (bar_h + gap) + 60;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << left + width_px + 60 << "' height='"
      << height << "' font-family='sans-serif' font-size='12'>\n";
    f << "<text x='" << left << "' y='20' font-size='14'>End-to-end odometry latency [ms]</text>\n";
    int y = top;
    for (const auto& [label, b] : items) {
        f << "<text x='8' y='" << y + bar_h / 2 + 4 << "'>" << label << "</text>\n";
        double x = left;
        int color = 0;
        for (const auto& s : b.stages) {
            if (s.name == "feature_update") { ++color; continue; }  // send variant is on the path
            const double w = s.mean_ms / max_total * width_px;
            f << "<rect x='" << x << "' y='" << y << "' width='" << std::max(w, 0.5) << "' height='"
              << bar_h << "' fill='" << kColors[color % 5] << "'><title>" << s.name << ": "
              << s.mean_ms << " ms</title></rect>\n";
            x += w;
            ++color;
        }
        f << "<text x='" << x + 6 << "' y='" << y + bar_h / 2 + 4 << "'>"
          << to_sig_figs(b.end_to_end_ms, 3) << " ms</text>\n";
        y += bar_h + gap;
    }
    // legend
    int lx = left;
    int color = 0;
    for (const char* name : {"image tx", "OF tx", "feature update (send)", "estimation"}) {
        if (color == 2) ++color;  // skip the non-send feature-update color
        f << "<rect x='" << lx << "' y='" << y << "' width='14' height='14' fill='"
          << kColors[color % 5] << "'/>\n<text x='" << lx + 20 << "' y='" << y + 12 << "'>" << name
          << "</text>\n";
        lx += 170;
        ++color;
    }
    f << "</svg>\n";
}

}  // namespace ofvio
