#pragma once

#include <cmath>

#include "ctmar/projector.hpp"

// Per-ray sampling shared by the OpenMP projector and the serial reference.

namespace ctmar::detail {

inline double bilinear(const GridF& g, double fr, double fc) {
    // fr/fc are fractional row/col positions; outside the grid reads 0
    int r0 = static_cast<int>(std::floor(fr));
    int c0 = static_cast<int>(std::floor(fc));
    double wr = fr - r0;
    double wc = fc - c0;
    double acc = 0.0;
    for (int dr = 0; dr <= 1; ++dr) {
        int r = r0 + dr;
        if (r < 0 || r >= g.rows) continue;
        double wy = dr ? wr : 1.0 - wr;
        for (int dc = 0; dc <= 1; ++dc) {
            int c = c0 + dc;
            if (c < 0 || c >= g.cols) continue;
            double wx = dc ? wc : 1.0 - wc;
            acc += wy * wx * g.at(r, c);
        }
    }
    return acc;
}

// One parallel ray: angle theta, signed detector offset s (mm). Direction of
// integration is (-sin t, cos t); the detector axis is (cos t, sin t), so at
// angle 0 the profile reads off x directly. Joseph-style: one sample per
// image pixel pitch, bilinear interpolation, sum * step, mm -> cm folded in.
inline double integrate_ray(const GridF& img, double pitch_mm, double cos_t, double sin_t, double s_mm,
                            double half_extent_mm) {
    const double step = pitch_mm;
    const double t_max = half_extent_mm * 1.4142135623730951;
    const int n_steps = static_cast<int>(std::ceil(2.0 * t_max / step));
    const double n = img.rows;  // square
    double acc = 0.0;
    for (int k = 0; k < n_steps; ++k) {
        double t = -t_max + (k + 0.5) * step;
        double x = s_mm * cos_t - t * sin_t;
        double y = s_mm * sin_t + t * cos_t;
        double fc = x / pitch_mm + 0.5 * n - 0.5;
        double fr = y / pitch_mm + 0.5 * n - 0.5;
        acc += bilinear(img, fr, fc);
    }
    return acc * step * 0.1;  // mm -> cm
}

inline void validate_projection_input(const Image& mu_map, const ScanGeometry& geom) {
    geom.validate();
    if (mu_map.values.rows != mu_map.values.cols)
        throw validation_error("forward_project: image must be square");
    if (mu_map.pixel_pitch_mm <= 0.0) throw validation_error("forward_project: pixel pitch must be positive");
    for (float f : mu_map.values.v)
        if (!(f >= 0.0f)) throw validation_error("forward_project: attenuation must be finite and >= 0");
}

}  // namespace ctmar::detail
