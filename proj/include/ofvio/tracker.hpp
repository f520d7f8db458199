#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "ofvio/camera.hpp"
#include "ofvio/csv.hpp"
#include "ofvio/types.hpp"

namespace ofvio {

struct TrackObservation {
    int64_t frame_id = 0;
    Vec2 pixel = Vec2::Zero();
    Vec3 unit = Vec3::UnitZ();  // undistorted unit-sphere ray in the camera frame
};

/// A feature's chained observations across consecutive frames.
struct FeatureTrack {
    int64_t track_id = 0;
    std::vector<TrackObservation> observations;
    std::vector<int> hamming_history;  // one entry per flow vector (observations.size() - 1)

    int length() const { return static_cast<int>(observations.size()); }
    const TrackObservation& last() const { return observations.back(); }
    double mean_hamming() const {
        if (hamming_history.empty()) return 0.0;
        return std::accumulate(hamming_history.begin(), hamming_history.end(), 0.0) /
               hamming_history.size();
    }
};

/// "Longest" ordering used when tracks must be ranked: longer first,
/// then lower mean Hamming, then lower track id.
inline bool longest_track_first(const FeatureTrack& a, const FeatureTrack& b) {
    if (a.length() != b.length()) return a.length() > b.length();
    const double ha = a.mean_hamming(), hb = b.mean_hamming();
    if (ha != hb) return ha < hb;
    return a.track_id < b.track_id;
}

struct TrackerConfig {
    int capacity = 150;
    PinholeRadTan camera;
};

struct IngestResult {
    std::vector<int64_t> dropped;        // tracks lost this frame
    std::vector<FlowVector> candidates;  // flow vectors that did not extend a track
};

struct FeatureFrameEntry {
    int64_t track_id = 0;
    Vec3 unit = Vec3::UnitZ();
    Vec2 pixel = Vec2::Zero();
};

/// Concatenates per-frame flow vectors into persistent feature tracks.
///
/// Joining is by exact integer pixel equality of the flow vector's prev endpoint
/// with a track's last observation (sub-pixel inputs are quantized for the join
/// but stored at full precision). No geometric outlier rejection is applied:
/// admission is purely Hamming-ranked and survival purely match-driven.
class TrackerState {
  public:
    explicit TrackerState(const TrackerConfig& cfg, bool keep_history = false)
        : cfg_(cfg), keep_history_(keep_history) {
        if (cfg.capacity < 1) throw std::invalid_argument("TrackerState: capacity must be >= 1");
        if (!cfg.camera.valid()) throw std::invalid_argument("TrackerState: camera must be valid");
    }

    const std::map<int64_t, FeatureTrack>& active() const { return active_; }
    int64_t last_frame_id() const { return last_frame_id_; }

    IngestResult ingest_flow(int64_t frame_id, const std::vector<FlowVector>& flow_vectors) {
        if (started_ && frame_id != last_frame_id_ + 1)
            throw std::invalid_argument("ingest_flow: frame gap (got " + std::to_string(frame_id) +
                                        " after " + std::to_string(last_frame_id_) +
                                        "); tracks cannot bridge missing frames");
        IngestResult result;
        std::unordered_map<int64_t, FeatureTrack> extended;
        extended.reserve(active_.size());

        for (const auto& fv : flow_vectors) {
            const uint64_t key = quantized_key(fv.prev);
            const auto it = endpoint_index_.find(key);
            if (it == endpoint_index_.end()) {
                result.candidates.push_back(fv);
                continue;
            }
            auto track_it = active_.find(it->second);
            if (track_it == active_.end() || extended.count(it->second)) {
                result.candidates.push_back(fv);
                continue;
            }
            FeatureTrack track = std::move(track_it->second);
            track.observations.push_back(
                {frame_id, fv.curr, cfg_.camera.undistort_project(fv.curr)});
            track.hamming_history.push_back(fv.hamming);
            extended.emplace(track.track_id, std::move(track));
            active_.erase(track_it);
        }

        // everything left in active_ was not extended and is lost
        for (auto& [id, track] : active_) {
            result.dropped.push_back(id);
            if (keep_history_) history_.push_back(std::move(track));
        }
        active_.clear();
        endpoint_index_.clear();
        for (auto& [id, track] : extended) {
            endpoint_index_[quantized_key(track.last().pixel)] = id;
            active_.emplace(id, std::move(track));
        }
        std::sort(result.dropped.begin(), result.dropped.end());

        started_ = true;
        last_frame_id_ = frame_id;
        return result;
    }

    /// Admits candidates as new length-2 tracks while below capacity, in
    /// ascending (hamming, descending cornerness) order.
    void admit_tracks(const std::vector<FlowVector>& candidates) {
        if (static_cast<int>(active_.size()) >= cfg_.capacity) return;
        std::vector<int> order(candidates.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (candidates[a].hamming != candidates[b].hamming)
                return candidates[a].hamming < candidates[b].hamming;
            if (candidates[a].cornerness != candidates[b].cornerness)
                return candidates[a].cornerness > candidates[b].cornerness;
            return a < b;
        });
        for (int idx : order) {
            if (static_cast<int>(active_.size()) >= cfg_.capacity) break;
            const FlowVector& fv = candidates[idx];
            const uint64_t key = quantized_key(fv.curr);
            if (endpoint_index_.count(key)) continue;  // endpoint already owned by a track
            FeatureTrack track;
            track.track_id = next_track_id_++;
            track.observations.push_back(
                {last_frame_id_ - 1, fv.prev, cfg_.camera.undistort_project(fv.prev)});
            track.observations.push_back(
                {last_frame_id_, fv.curr, cfg_.camera.undistort_project(fv.curr)});
            track.hamming_history.push_back(fv.hamming);
            endpoint_index_[key] = track.track_id;
            active_.emplace(track.track_id, std::move(track));
        }
    }

    /// Emits all active tracks when frame_id is on the decimation grid.
    std::vector<FeatureFrameEntry> emit_feature_frame(int64_t frame_id, int decimation) const {
        if (decimation < 1) throw std::invalid_argument("emit_feature_frame: decimation must be >= 1");
        std::vector<FeatureFrameEntry> out;
        if (frame_id % decimation != 0) return out;
        out.reserve(active_.size());
        for (const auto& [id, track] : active_)
            if (track.length() >= 2) out.push_back({id, track.last().unit, track.last().pixel});
        return out;
    }

    /// Keeps only the `capacity` longest tracks; used when the capacity shrinks.
    void truncate_to_capacity() {
        if (static_cast<int>(active_.size()) <= cfg_.capacity) return;
        std::vector<FeatureTrack> tracks;
        tracks.reserve(active_.size());
        for (auto& [id, t] : active_) tracks.push_back(std::move(t));
        std::sort(tracks.begin(), tracks.end(), longest_track_first);
        active_.clear();
        endpoint_index_.clear();
        for (size_t i = 0; i < tracks.size(); ++i) {
            if (static_cast<int>(i) < cfg_.capacity) {
                endpoint_index_[quantized_key(tracks[i].last().pixel)] = tracks[i].track_id;
                active_.emplace(tracks[i].track_id, std::move(tracks[i]));
            } else if (keep_history_) {
                history_.push_back(std::move(tracks[i]));
            }
        }
    }

    void set_capacity(int capacity) {
        if (capacity < 1) throw std::invalid_argument("set_capacity: capacity must be >= 1");
        cfg_.capacity = capacity;
        truncate_to_capacity();
    }

    /// Debug dump: track_id,frame_id,x,y,ux,uy,uz,hamming (one row per observation;
    /// the first observation repeats the hamming of the flow vector that created it).
    void dump_csv(const std::string& path) const {
        CsvWriter csv(path, "track_id,frame_id,x,y,ux,uy,uz,hamming");
        auto dump_track = [&](const FeatureTrack& t) {
            for (size_t k = 0; k < t.observations.size(); ++k) {
                const auto& obs = t.observations[k];
                const int ham = t.hamming_history.empty()
                                    ? 0
                                    : t.hamming_history[k == 0 ? 0 : k - 1];
                csv.write_row({std::to_string(t.track_id), std::to_string(obs.frame_id),
                               format_double(obs.pixel.x()), format_double(obs.pixel.y()),
                               format_double(obs.unit.x()), format_double(obs.unit.y()),
                               format_double(obs.unit.z()), std::to_string(ham)});
            }
        };
        std::vector<const FeatureTrack*> all;
        for (const auto& t : history_) all.push_back(&t);
        for (const auto& [id, t] : active_) all.push_back(&t);
        std::sort(all.begin(), all.end(),
                  [](const FeatureTrack* a, const FeatureTrack* b) { return a->track_id < b->track_id; });
        for (const auto* t : all) dump_track(*t);
    }

  private:
    static uint64_t quantized_key(const Vec2& px) {
        const int64_t x = std::llround(px.x());
        const int64_t y = std::llround(px.y());
        return (static_cast<uint64_t>(static_cast<uint32_t>(y)) << 32) |
               static_cast<uint32_t>(x);
    }

    TrackerConfig cfg_;
    bool keep_history_ = false;
    bool started_ = false;
    int64_t last_frame_id_ = -1;
    int64_t next_track_id_ = 0;  // ids are never reused
    std::map<int64_t, FeatureTrack> active_;
    std::unordered_map<uint64_t, int64_t> endpoint_index_;
    std::vector<FeatureTrack> history_;
};

/// Convenience wrapper matching the free-function shape of the tracker API.
inline Vec3 undistort_project(const Vec2& pixel, const PinholeRadTan& camera) {
    return camera.undistort_project(pixel);
}

}  // namespace ofvio
