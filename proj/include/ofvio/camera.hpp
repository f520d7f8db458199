#pragma once

#include <stdexcept>
#include <string>

#include "ofvio/geometry.hpp"

namespace ofvio {

/// Pinhole camera with radial-tangential distortion (k1, k2, p1, p2).
struct PinholeRadTan {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    double k1 = 0, k2 = 0, p1 = 0, p2 = 0;

    bool valid() const { return fx > 0 && fy > 0; }

    /// Applies distortion to normalized image coordinates.
    Vec2 distort(const Vec2& n) const {
        const double x = n.x(), y = n.y();
        const double r2 = x * x + y * y;
        const double radial = 1.0 + k1 * r2 + k2 * r2 * r2;
        const double dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
        const double dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
        return Vec2(x * radial + dx, y * radial + dy);
    }

    Vec2 normalized_to_pixel(const Vec2& nd) const {
        return Vec2(fx * nd.x() + cx, fy * nd.y() + cy);
    }

    /// Projects a camera-frame point (z > 0) to a distorted pixel.
    Vec2 project(const Vec3& p_cam) const {
        if (p_cam.z() <= 0.0) throw std::invalid_argument("project: point not in front of camera");
        return normalized_to_pixel(distort(Vec2(p_cam.x() / p_cam.z(), p_cam.y() / p_cam.z())));
    }

    /// Undistorts a pixel (fixed-point iteration) and returns the unit-sphere ray.
    /// Throws when the iteration fails to reproduce the pixel within residual_px.
    Vec3 undistort_project(const Vec2& pixel, int max_iterations = 8, double tol = 1e-8,
                           double residual_px = 1e-3) const {
        const Vec2 nd((pixel.x() - cx) / fx, (pixel.y() - cy) / fy);
        Vec2 n = nd;
        for (int it = 0; it < max_iterations; ++it) {
            const double x = n.x(), y = n.y();
            const double r2 = x * x + y * y;
            const double radial = 1.0 + k1 * r2 + k2 * r2 * r2;
            const double dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
            const double dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
            const Vec2 next((nd.x() - dx) / radial, (nd.y() - dy) / radial);
            const double step = (next - n).norm();
            n = next;
            if (step < tol) break;
        }
        const Vec2 back = normalized_to_pixel(distort(n));
        if ((back - pixel).norm() > residual_px)
            throw std::runtime_error("undistort_project: iteration diverged at pixel (" +
                                     std::to_string(pixel.x()) + ", " + std::to_string(pixel.y()) + ")");
        return Vec3(n.x(), n.y(), 1.0).normalized();
    }
};

}  // namespace ofvio
