#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ofvio/rng.hpp"

namespace ofvio {

/// 8-bit grayscale image, row-major.
class Image8 {
  public:
    Image8() = default;
    Image8(int width, int height, uint8_t fill = 0)
        : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {
        if (width <= 0 || height <= 0) throw std::invalid_argument("Image8: non-positive size");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return data_.empty(); }

    uint8_t at(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x]; }
    uint8_t& at(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }

    /// Clamped access, replicates the border.
    uint8_t at_clamped(int x, int y) const {
        x = std::clamp(x, 0, width_ - 1);
        y = std::clamp(y, 0, height_ - 1);
        return at(x, y);
    }

    const uint8_t* row(int y) const { return data_.data() + static_cast<size_t>(y) * width_; }
    uint8_t* row(int y) { return data_.data() + static_cast<size_t>(y) * width_; }
    const std::vector<uint8_t>& data() const { return data_; }
    std::vector<uint8_t>& data() { return data_; }

    bool operator==(const Image8& o) const {
        return width_ == o.width_ && height_ == o.height_ && data_ == o.data_;
    }

    /// Bilinear sample with border clamping; (x, y) in pixel coordinates.
    double sample_bilinear(double x, double y) const {
        const int x0 = static_cast<int>(std::floor(x));
        const int y0 = static_cast<int>(std::floor(y));
        const double fx = x - x0;
        const double fy = y - y0;
        const double v00 = at_clamped(x0, y0);
        const double v10 = at_clamped(x0 + 1, y0);
        const double v01 = at_clamped(x0, y0 + 1);
        const double v11 = at_clamped(x0 + 1, y0 + 1);
        return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
    }

  private:
    int width_ = 0;
    int height_ = 0;
    std::vector<uint8_t> data_;
};

/// Integer box-filter sums over a (2r+1)x(2r+1) window, border replicated.
/// Sums (not means) keep comparisons exact.
inline std::vector<int32_t> box_sum(const Image8& img, int radius) {
    const int w = img.width(), h = img.height();
    std::vector<int32_t> row_sum(static_cast<size_t>(w) * h);
    // horizontal pass
    for (int y = 0; y < h; ++y) {
        int32_t acc = 0;
        for (int x = -radius; x <= radius; ++x) acc += img.at_clamped(x, y);
        for (int x = 0; x < w; ++x) {
            row_sum[static_cast<size_t>(y) * w + x] = acc;
            acc += img.at_clamped(x + radius + 1, y);
            acc -= img.at_clamped(x - radius, y);
        }
    }
    // vertical pass
    std::vector<int32_t> out(static_cast<size_t>(w) * h);
    for (int x = 0; x < w; ++x) {
        int32_t acc = 0;
        for (int y = -radius; y <= radius; ++y)
            acc += row_sum[static_cast<size_t>(std::clamp(y, 0, h - 1)) * w + x];
        for (int y = 0; y < h; ++y) {
            out[static_cast<size_t>(y) * w + x] = acc;
            acc += row_sum[static_cast<size_t>(std::clamp(y + radius + 1, 0, h - 1)) * w + x];
            acc -= row_sum[static_cast<size_t>(std::clamp(y - radius, 0, h - 1)) * w + x];
        }
    }
    return out;
}

inline Image8 crop(const Image8& img, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > img.width() || y0 + h > img.height())
        throw std::invalid_argument("crop: rectangle outside image");
    Image8 out(w, h);
    for (int y = 0; y < h; ++y)
        std::copy(img.row(y0 + y) + x0, img.row(y0 + y) + x0 + w, out.row(y));
    return out;
}

/// Pixel binning: average of each factor x factor block, rounded to nearest.
/// Trailing rows/columns that do not fill a block are discarded.
inline Image8 bin_down(const Image8& img, int factor) {
    if (factor == 1) return img;
    if (factor != 2 && factor != 4) throw std::invalid_argument("bin_down: factor must be 1, 2 or 4");
    const int w = img.width() / factor, h = img.height() / factor;
    if (w == 0 || h == 0) throw std::invalid_argument("bin_down: image too small");
    Image8 out(w, h);
    const int n = factor * factor;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int sum = 0;
            for (int dy = 0; dy < factor; ++dy)
                for (int dx = 0; dx < factor; ++dx)
                    sum += img.at(x * factor + dx, y * factor + dy);
            out.at(x, y) = static_cast<uint8_t>((sum + n / 2) / n);
        }
    }
    return out;
}

/// 2x downsample with 2x2 averaging (pyramid level construction).
inline Image8 half_size(const Image8& img) {
    const int w = std::max(1, img.width() / 2), h = std::max(1, img.height() / 2);
    Image8 out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int sum = img.at_clamped(2 * x, 2 * y) + img.at_clamped(2 * x + 1, 2 * y) +
                            img.at_clamped(2 * x, 2 * y + 1) + img.at_clamped(2 * x + 1, 2 * y + 1);
            out.at(x, y) = static_cast<uint8_t>((sum + 2) / 4);
        }
    return out;
}

// --- PGM (binary P5) I/O ---

inline void save_pgm(const Image8& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_pgm: cannot open " + path);
    f << "P5\n" << img.width() << " " << img.height() << "\n255\n";
    f.write(reinterpret_cast<const char*>(img.data().data()),
            static_cast<std::streamsize>(img.data().size()));
    if (!f) throw std::runtime_error("save_pgm: write failed for " + path);
}

inline Image8 load_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_pgm: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw std::runtime_error("load_pgm: " + path + " is not binary PGM (P5)");
    auto next_int = [&]() {
        // skip whitespace and '#' comment lines
        int c = f.peek();
        while (c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '#') {
            if (c == '#') {
                std::string line;
                std::getline(f, line);
            } else {
                f.get();
            }
            c = f.peek();
        }
        int v;
        f >> v;
        return v;
    };
    const int w = next_int(), h = next_int(), maxval = next_int();
    if (!f || w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("load_pgm: bad header in " + path);
    f.get();  // single whitespace after maxval
    Image8 img(w, h);
    f.read(reinterpret_cast<char*>(img.data().data()),
           static_cast<std::streamsize>(img.data().size()));
    if (f.gcount() != static_cast<std::streamsize>(img.data().size()))
        throw std::runtime_error("load_pgm: truncated pixel data in " + path);
    return img;
}

/// Seedable corner-rich texture: Gaussian blobs with log-uniform amplitudes on
/// a flat background. The corner count decays gently with the detection
/// threshold, which a proportional budget controller needs.
inline Image8 make_blob_texture(int width, int height, int n_blobs, uint64_t seed,
                                double amp_min = 20.0, double amp_max = 250.0) {
    Image8 img(width, height, 64);
    Rng rng(seed);
    std::vector<std::pair<int, int>> centers;
    const int margin = 20;
    const double min_d2 = 8.0 * 8.0;
    for (int i = 0; i < n_blobs; ++i) {
        int x = 0, y = 0;
        bool placed = false;
        for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
            x = margin + static_cast<int>(rng.uniform_index(std::max(1, width - 2 * margin)));
            y = margin + static_cast<int>(rng.uniform_index(std::max(1, height - 2 * margin)));
            placed = true;
            for (const auto& [cx, cy] : centers) {
                const double dx = x - cx, dy = y - cy;
                if (dx * dx + dy * dy < min_d2) {
                    placed = false;
                    break;
                }
            }
        }
        if (!placed) continue;
        centers.emplace_back(x, y);
        const double amp = amp_min * std::exp(rng.uniform() * std::log(amp_max / amp_min));
        const double fx = x + rng.uniform() - 0.5;
        const double fy = y + rng.uniform() - 0.5;
        const double sigma2 = 2.0 * 1.0 * 1.0;
        for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx) {
                const int ix = x + dx, iy = y + dy;
                if (ix < 0 || ix >= width || iy < 0 || iy >= height) continue;
                const double r2 = (ix - fx) * (ix - fx) + (iy - fy) * (iy - fy);
                const double v = img.at(ix, iy) + amp * std::exp(-r2 / sigma2);
                img.at(ix, iy) = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0) + 0.5);
            }
    }
    return img;
}

/// Seedable random-byte texture; smooth_passes applies 3x3 box blurs.
inline Image8 make_noise_image(int width, int height, uint64_t seed, int smooth_passes = 0) {
    Image8 img(width, height);
    Rng rng(seed);
    for (auto& px : img.data()) px = static_cast<uint8_t>(rng.next_u64() & 0xff);
    for (int pass = 0; pass < smooth_passes; ++pass) {
        const auto sums = box_sum(img, 1);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                img.at(x, y) = static_cast<uint8_t>((sums[static_cast<size_t>(y) * width + x] + 4) / 9);
    }
    return img;
}

}  // namespace ofvio
