#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "ofvio/image.hpp"
#include "ofvio/rng.hpp"
#include "ofvio/types.hpp"

namespace ofvio {

struct Keypoint {
    int x = 0;
    int y = 0;
    double cornerness = 0.0;
};

/// 256-bit BRIEF descriptor.
struct Descriptor {
    std::array<uint64_t, 4> bits{};

    void set(int i) { bits[i >> 6] |= (1ull << (i & 63)); }
    bool test(int i) const { return (bits[i >> 6] >> (i & 63)) & 1ull; }

    int hamming(const Descriptor& o) const {
        int d = 0;
        for (int w = 0; w < 4; ++w) d += std::popcount(bits[w] ^ o.bits[w]);
        return d;
    }

    bool operator==(const Descriptor& o) const { return bits == o.bits; }
};

struct DescribedKeypoint {
    Keypoint kp;
    Descriptor desc;
};

/// Emulated optical-flow unit configuration. The processed image (after crop
/// and subsampling) must not exceed VGA; at most 2048 descriptors per frame.
struct SensorConfig {
    int crop_x = 0, crop_y = 0, crop_w = 0, crop_h = 0;  // w/h of 0 means full frame
    int subsample = 1;                                   // 1, 2 or 4 (binning)
    double fps = 20.0;
    int brief_target = 200;
    int max_descriptors = 300;
    int spatial_cap = 4;     // descriptors per 16x16 tile
    int search_radius = 48;  // Chebyshev, pixels
    int max_hamming = 60;
    double threshold_init = 20.0;
    double threshold_min = 5.0;
    double threshold_max = 120.0;
    double controller_alpha = 0.5;

    void validate() const {
        if (subsample != 1 && subsample != 2 && subsample != 4)
            throw std::invalid_argument("SensorConfig: subsample must be 1, 2 or 4");
        if (max_descriptors <= 0 || max_descriptors > 2048)
            throw std::invalid_argument("SensorConfig: max_descriptors must be in (0, 2048]");
        if (spatial_cap < 1) throw std::invalid_argument("SensorConfig: spatial_cap must be >= 1");
        if (brief_target <= 0 || brief_target > max_descriptors)
            throw std::invalid_argument("SensorConfig: brief_target must be in (0, max_descriptors]");
        if (fps <= 0) throw std::invalid_argument("SensorConfig: fps must be > 0");
        if (search_radius < 1) throw std::invalid_argument("SensorConfig: search_radius must be >= 1");
        if (max_hamming < 0 || max_hamming > 256)
            throw std::invalid_argument("SensorConfig: max_hamming must be in [0, 256]");
        if (!(threshold_min > 0 && threshold_min <= threshold_init &&
              threshold_init <= threshold_max))
            throw std::invalid_argument("SensorConfig: need 0 < t_min <= t_init <= t_max");
    }

    /// Checks the processed-image geometry for a given input size.
    void validate_for(int input_w, int input_h) const {
        validate();
        int w = crop_w > 0 ? crop_w : input_w;
        int h = crop_h > 0 ? crop_h : input_h;
        if (crop_x < 0 || crop_y < 0 || crop_x + w > input_w || crop_y + h > input_h)
            throw std::invalid_argument("SensorConfig: crop rectangle outside input image");
        w /= subsample;
        h /= subsample;
        if (w > 640 || h > 480)
            throw std::invalid_argument("SensorConfig: processed image exceeds VGA (640x480)");
        if (w < 32 || h < 32)
            throw std::invalid_argument("SensorConfig: processed image below 32x32 minimum");
    }

    /// Descriptor target/budget pairs as configured on the sensor:
    /// target 150 caps at 200, target 200 at 300, target 300 at 500.
    static SensorConfig for_target(int target) {
        SensorConfig c;
        c.brief_target = target;
        if (target == 150) c.max_descriptors = 200;
        else if (target == 200) c.max_descriptors = 300;
        else if (target == 300) c.max_descriptors = 500;
        else c.max_descriptors = std::min(2048, target * 3 / 2);
        return c;
    }
};

// --- FAST-9 segment-test detection ---

namespace fast_detail {

// 16-pixel Bresenham circle of radius 3, clockwise from 12 o'clock
inline constexpr int kCircleX[16] = {0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3, -3, -3, -2, -1};
inline constexpr int kCircleY[16] = {-3, -3, -2, -1, 0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3};

/// Segment test at one pixel. Returns the SAD cornerness of the strongest
/// contiguous arc of >= 9 same-side pixels, or a negative value if none.
inline double segment_score(const Image8& img, int x, int y, double threshold) {
    const int c = img.at(x, y);
    int cls[32];    // +1 brighter, -1 darker, 0 similar; doubled for wraparound
    int diff[32];   // |I - c|
    for (int i = 0; i < 16; ++i) {
        const int v = img.at(x + kCircleX[i], y + kCircleY[i]);
        const int d = v - c;
        int s = 0;
        if (static_cast<double>(d) > threshold) s = 1;
        else if (static_cast<double>(-d) > threshold) s = -1;
        cls[i] = cls[i + 16] = s;
        diff[i] = diff[i + 16] = std::abs(d);
    }
    double best = -1.0;
    int i = 0;
    while (i < 16) {
        if (cls[i] == 0) {
            ++i;
            continue;
        }
        // skip runs that continue from before index 0 (handled by the wrapped copy)
        if (i == 0 && cls[15] == cls[0]) {
            ++i;
            continue;
        }
        const int s = cls[i];
        int len = 0;
        double sum = 0.0;
        while (len < 16 && cls[i + len] == s) {
            sum += diff[i + len] - threshold;
            ++len;
        }
        if (len >= 9 && sum > best) best = sum;
        i += len;
    }
    return best;
}

}  // namespace fast_detail

/// FAST-9 corners, sorted by descending cornerness (ties by y then x).
inline std::vector<Keypoint> detect_fast(const Image8& img, double threshold) {
    if (img.width() < 32 || img.height() < 32)
        throw std::invalid_argument("detect_fast: image must be at least 32x32");
    std::vector<Keypoint> out;
    const int w = img.width(), h = img.height();
    for (int y = 3; y < h - 3; ++y) {
        for (int x = 3; x < w - 3; ++x) {
            // a 9-long arc must contain two adjacent compass points on the same side
            const int c = img.at(x, y);
            const int p0 = img.at(x, y - 3), p4 = img.at(x + 3, y);
            const int p8 = img.at(x, y + 3), p12 = img.at(x - 3, y);
            auto side = [&](int v) {
                if (static_cast<double>(v - c) > threshold) return 1;
                if (static_cast<double>(c - v) > threshold) return -1;
                return 0;
            };
            const int s0 = side(p0), s4 = side(p4), s8 = side(p8), s12 = side(p12);
            const bool possible = (s0 && (s0 == s4 || s0 == s12)) || (s8 && (s8 == s4 || s8 == s12));
            if (!possible) continue;
            const double score = fast_detail::segment_score(img, x, y, threshold);
            if (score >= 0.0) out.push_back({x, y, score});
        }
    }
    std::sort(out.begin(), out.end(), [](const Keypoint& a, const Keypoint& b) {
        if (a.cornerness != b.cornerness) return a.cornerness > b.cornerness;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    return out;
}

/// 3x3 non-maximum suppression, then greedy per-tile cap, then budget truncation.
/// Input must be sorted by descending cornerness. Equal-score NMS ties are
/// resolved in favour of the raster-earlier keypoint.
inline std::vector<Keypoint> suppress_and_cap(const std::vector<Keypoint>& keypoints,
                                              int spatial_cap, int max_descriptors) {
    if (spatial_cap < 1) throw std::invalid_argument("suppress_and_cap: spatial_cap must be >= 1");
    if (max_descriptors < 0)
        throw std::invalid_argument("suppress_and_cap: max_descriptors must be >= 0");

    std::unordered_map<int64_t, double> score_at;
    score_at.reserve(keypoints.size() * 2);
    auto key = [](int x, int y) { return (static_cast<int64_t>(y) << 32) | static_cast<uint32_t>(x); };
    for (const auto& kp : keypoints) score_at[key(kp.x, kp.y)] = kp.cornerness;

    std::vector<Keypoint> out;
    std::unordered_map<int64_t, int> tile_count;
    for (const auto& kp : keypoints) {
        bool suppressed = false;
        for (int dy = -1; dy <= 1 && !suppressed; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const auto it = score_at.find(key(kp.x + dx, kp.y + dy));
                if (it == score_at.end()) continue;
                const double cn = it->second;
                if (cn > kp.cornerness ||
                    (cn == kp.cornerness &&
                     std::make_pair(kp.y + dy, kp.x + dx) < std::make_pair(kp.y, kp.x))) {
                    suppressed = true;
                    break;
                }
            }
        if (suppressed) continue;
        const int64_t tile = key(kp.x / 16, kp.y / 16);
        int& count = tile_count[tile];
        if (count >= spatial_cap) continue;
        ++count;
        out.push_back(kp);
        if (static_cast<int>(out.size()) >= max_descriptors) break;
    }
    return out;
}

// --- BRIEF-256 description ---

namespace brief_detail {

constexpr int kBits = 256;
constexpr int kPatchRadius = 15;   // 31x31 patch
constexpr int kBorderMargin = 16;  // patch plus smoothing support

struct Pattern {
    std::array<int8_t, kBits> px, py, qx, qy;
};

/// Fixed sampling pattern: isotropic Gaussian (sigma = 31/5), seed-deterministic.
inline const Pattern& brief_pattern() {
    static const Pattern pattern = [] {
        Pattern p;
        Rng rng(0x5eedb1efULL);
        const double sigma = 31.0 / 5.0;
        auto draw = [&]() {
            const double v = rng.normal(0.0, sigma);
            return static_cast<int8_t>(
                std::clamp<long>(std::lround(v), -kPatchRadius, kPatchRadius));
        };
        for (int i = 0; i < kBits; ++i) {
            p.px[i] = draw();
            p.py[i] = draw();
            do {  // a pair comparing a point against itself carries no information
                p.qx[i] = draw();
                p.qy[i] = draw();
            } while (p.qx[i] == p.px[i] && p.qy[i] == p.py[i]);
        }
        return p;
    }();
    return pattern;
}

}  // namespace brief_detail

/// BRIEF descriptors after 5x5 box smoothing; bit i = 1 iff smoothed(p_i) < smoothed(q_i)
/// (ties give 0). Keypoints closer than 16 px to an edge are dropped, not errored.
inline std::vector<DescribedKeypoint> describe_brief(const Image8& img,
                                                     const std::vector<Keypoint>& keypoints) {
    const auto& pat = brief_detail::brief_pattern();
    const auto smooth = box_sum(img, 2);  // integer 5x5 sums keep comparisons exact
    const int w = img.width(), h = img.height();
    const int margin = brief_detail::kBorderMargin;

    std::vector<DescribedKeypoint> out;
    out.reserve(keypoints.size());
    for (const auto& kp : keypoints) {
        if (kp.x < margin || kp.y < margin || kp.x >= w - margin || kp.y >= h - margin) continue;
        DescribedKeypoint dk;
        dk.kp = kp;
        for (int i = 0; i < brief_detail::kBits; ++i) {
            const int32_t a = smooth[static_cast<size_t>(kp.y + pat.py[i]) * w + (kp.x + pat.px[i])];
            const int32_t b = smooth[static_cast<size_t>(kp.y + pat.qy[i]) * w + (kp.x + pat.qx[i])];
            if (a < b) dk.desc.set(i);
        }
        out.push_back(dk);
    }
    return out;
}

/// Multiplicative proportional controller for the cornerness threshold.
inline double update_threshold(double threshold, int detected_count, int brief_target,
                               const SensorConfig& cfg) {
    const double ratio = static_cast<double>(detected_count) / brief_target;
    const double next = threshold * std::pow(ratio, cfg.controller_alpha);
    return std::clamp(next, cfg.threshold_min, cfg.threshold_max);
}

// --- Bounded-range Hamming matching ---

/// One-to-one matching between consecutive descriptor sets. Candidate pairs lie
/// within the Chebyshev search radius and at most max_hamming apart; assignment
/// is greedy in ascending (hamming, squared displacement, prev index, curr index).
inline std::vector<FlowVector> match_frames(const std::vector<DescribedKeypoint>& prev,
                                            const std::vector<DescribedKeypoint>& curr,
                                            const SensorConfig& cfg) {
    struct Candidate {
        int hamming;
        int64_t disp_sq;
        int prev_idx;
        int curr_idx;
    };
    std::vector<Candidate> cands;

    // bin previous keypoints for the radius query
    const int cell = std::max(1, cfg.search_radius);
    std::unordered_map<int64_t, std::vector<int>> grid;
    auto cell_key = [cell](int x, int y) {
        return (static_cast<int64_t>(y / cell) << 32) | static_cast<uint32_t>(x / cell + 0x40000000);
    };
    for (int j = 0; j < static_cast<int>(prev.size()); ++j)
        grid[cell_key(prev[j].kp.x, prev[j].kp.y)].push_back(j);

    for (int i = 0; i < static_cast<int>(curr.size()); ++i) {
        const auto& ck = curr[i];
        const int cx = ck.kp.x / cell, cy = ck.kp.y / cell;
        for (int gy = cy - 1; gy <= cy + 1; ++gy)
            for (int gx = cx - 1; gx <= cx + 1; ++gx) {
                const auto it = grid.find((static_cast<int64_t>(gy) << 32) |
                                          static_cast<uint32_t>(gx + 0x40000000));
                if (it == grid.end()) continue;
                for (int j : it->second) {
                    const int dx = ck.kp.x - prev[j].kp.x;
                    const int dy = ck.kp.y - prev[j].kp.y;
                    if (std::abs(dx) > cfg.search_radius || std::abs(dy) > cfg.search_radius)
                        continue;
                    const int ham = ck.desc.hamming(prev[j].desc);
                    if (ham > cfg.max_hamming) continue;
                    cands.push_back({ham, static_cast<int64_t>(dx) * dx + static_cast<int64_t>(dy) * dy,
                                     j, i});
                }
            }
    }

    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.hamming != b.hamming) return a.hamming < b.hamming;
        if (a.disp_sq != b.disp_sq) return a.disp_sq < b.disp_sq;
        if (a.prev_idx != b.prev_idx) return a.prev_idx < b.prev_idx;
        return a.curr_idx < b.curr_idx;
    });

    std::vector<char> prev_used(prev.size(), 0), curr_used(curr.size(), 0);
    std::vector<FlowVector> out;
    for (const auto& c : cands) {
        if (prev_used[c.prev_idx] || curr_used[c.curr_idx]) continue;
        prev_used[c.prev_idx] = 1;
        curr_used[c.curr_idx] = 1;
        FlowVector fv;
        fv.prev = Vec2(prev[c.prev_idx].kp.x, prev[c.prev_idx].kp.y);
        fv.curr = Vec2(curr[c.curr_idx].kp.x, curr[c.curr_idx].kp.y);
        fv.hamming = c.hamming;
        fv.cornerness = curr[c.curr_idx].kp.cornerness;
        out.push_back(fv);
    }
    return out;
}

// --- Frame-to-frame emulation ---

struct SensorFrameOutput {
    int64_t frame_id = 0;
    std::vector<FlowVector> flow;  // empty for the first frame
    double threshold = 0.0;        // threshold used for this frame's detection
    int descriptor_count = 0;
};

/// Stateful emulation of the on-sensor pipeline. Descriptors of frame k are kept
/// only until frame k+1 and never exposed, mirroring the sensor interface.
class SensorEmulator {
  public:
    explicit SensorEmulator(const SensorConfig& cfg) : cfg_(cfg), threshold_(cfg.threshold_init) {
        cfg_.validate();
    }

    const SensorConfig& config() const { return cfg_; }

    SensorFrameOutput process(const Image8& frame, int64_t frame_id) {
        cfg_.validate_for(frame.width(), frame.height());
        Image8 processed = preprocess(frame);

        SensorFrameOutput out;
        out.frame_id = frame_id;
        out.threshold = threshold_;

        auto detected = detect_fast(processed, threshold_);
        // keypoints too close to the border can never be described; drop before the cap
        const int margin = brief_detail::kBorderMargin;
        detected.erase(std::remove_if(detected.begin(), detected.end(),
                                      [&](const Keypoint& kp) {
                                          return kp.x < margin || kp.y < margin ||
                                                 kp.x >= processed.width() - margin ||
                                                 kp.y >= processed.height() - margin;
                                      }),
                       detected.end());
        const auto capped = suppress_and_cap(detected, cfg_.spatial_cap, cfg_.max_descriptors);
        auto described = describe_brief(processed, capped);
        out.descriptor_count = static_cast<int>(described.size());

        if (!first_) out.flow = match_frames(prev_, described, cfg_);
        prev_ = std::move(described);
        first_ = false;

        threshold_ = update_threshold(threshold_, out.descriptor_count, cfg_.brief_target, cfg_);
        return out;
    }

  private:
    Image8 preprocess(const Image8& frame) const {
        Image8 img = frame;
        if (cfg_.crop_w > 0 && cfg_.crop_h > 0)
            img = crop(img, cfg_.crop_x, cfg_.crop_y, cfg_.crop_w, cfg_.crop_h);
        if (cfg_.subsample != 1) img = bin_down(img, cfg_.subsample);
        return img;
    }

    SensorConfig cfg_;
    double threshold_;
    std::vector<DescribedKeypoint> prev_;
    bool first_ = true;
};

inline std::vector<SensorFrameOutput> emulate_stream(const std::vector<Image8>& frames,
                                                     const SensorConfig& cfg) {
    if (frames.size() < 2) throw std::invalid_argument("emulate_stream: need at least 2 frames");
    SensorEmulator emu(cfg);
    std::vector<SensorFrameOutput> out;
    out.reserve(frames.size());
    for (size_t k = 0; k < frames.size(); ++k)
        out.push_back(emu.process(frames[k], static_cast<int64_t>(k)));
    return out;
}

// --- Config file I/O (key-value, mirrors SensorConfig) ---

inline SensorConfig load_sensor_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open sensor config " + path);
    SensorConfig c;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        double v;
        if (!(ss >> key >> v))
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed line");
        if (key == "crop_x") c.crop_x = static_cast<int>(v);
        else if (key == "crop_y") c.crop_y = static_cast<int>(v);
        else if (key == "crop_w") c.crop_w = static_cast<int>(v);
        else if (key == "crop_h") c.crop_h = static_cast<int>(v);
        else if (key == "subsample") c.subsample = static_cast<int>(v);
        else if (key == "fps") c.fps = v;
        else if (key == "brief_target") c.brief_target = static_cast<int>(v);
        else if (key == "max_descriptors") c.max_descriptors = static_cast<int>(v);
        else if (key == "spatial_cap") c.spatial_cap = static_cast<int>(v);
        else if (key == "search_radius") c.search_radius = static_cast<int>(v);
        else if (key == "max_hamming") c.max_hamming = static_cast<int>(v);
        else if (key == "threshold_init") c.threshold_init = v;
        else if (key == "threshold_min") c.threshold_min = v;
        else if (key == "threshold_max") c.threshold_max = v;
        else if (key == "controller_alpha") c.controller_alpha = v;
        else
            std::cerr << "warning: " << path << ":" << line_no << ": unknown sensor config key '"
                      << key << "'\n";
    }
    c.validate();
    return c;
}

inline void save_sensor_config(const SensorConfig& c, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "crop_x " << c.crop_x << "\ncrop_y " << c.crop_y << "\ncrop_w " << c.crop_w
      << "\ncrop_h " << c.crop_h << "\nsubsample " << c.subsample << "\nfps " << c.fps
      << "\nbrief_target " << c.brief_target << "\nmax_descriptors " << c.max_descriptors
      << "\nspatial_cap " << c.spatial_cap << "\nsearch_radius " << c.search_radius
      << "\nmax_hamming " << c.max_hamming << "\nthreshold_init " << c.threshold_init
      << "\nthreshold_min " << c.threshold_min << "\nthreshold_max " << c.threshold_max
      << "\ncontroller_alpha " << c.controller_alpha << "\n";
}

}  // namespace ofvio
