#pragma once

#include <cstdint>
#include <string>

#include "ctmar/core.hpp"

namespace ctmar {

enum class SinoUnit { LineIntegral, NormalizedMeasurement };

std::string sino_unit_name(SinoUnit u);
SinoUnit sino_unit_from_name(const std::string& name);

// 2-D parallel-beam geometry. Angle k covers [0, 180) degrees on a uniform
// grid; detector d sits at signed offset (d + 0.5 - n_detectors/2) * pitch.
struct ScanGeometry {
    int n_angles = 720;
    int n_detectors = 1024;
    double fov_mm = 475.0;
    // optional zero-pad target for the completion network (rows, cols);
    // 0 means unpadded
    int pad_rows = 0;
    int pad_cols = 0;

    double detector_pitch_mm() const { return fov_mm / n_detectors; }
    double angle_rad(int k) const { return k * 3.14159265358979323846 / n_angles; }
    double detector_s_mm(int d) const { return (d + 0.5 - 0.5 * n_detectors) * detector_pitch_mm(); }

    void validate() const;
    std::uint64_t hash() const;
};

struct Sinogram {
    GridF values;  // n_angles x n_detectors, row = angle
    SinoUnit unit = SinoUnit::LineIntegral;
    ScanGeometry geom;
};

struct SinogramMask {
    GridB values;  // same shape as the sinogram it belongs to
};

// Attenuation image with square pixels; also carries reconstruction output.
struct Image {
    GridF values;
    double pixel_pitch_mm = 0.0;
    std::string provenance = "reference";  // uncorrected | li | wnn | learned | reference
};

// Ray-driven (Joseph-style) discretized line integrals: samples at one image
// pixel pitch along each ray, bilinear interpolation, sum * step. mm -> cm is
// folded in so output is dimensionless for mu in cm^-1.
Sinogram forward_project(const Image& mu_map, const ScanGeometry& geom);

// Forward projects a 0/1 image mask, thresholds at 1e-6, then dilates in the
// sinogram domain by a discrete disk of the given radius.
SinogramMask project_metal_mask(const GridB& image_mask, double pixel_pitch_mm,
                                const ScanGeometry& geom, int dilation_radius_px = 2);

// Masked bins are set to 0 (the deleted-data fill convention); unit preserved.
Sinogram apply_mask(const Sinogram& sino, const SinogramMask& mask);

Sinogram flip_detector_axis(const Sinogram& sino);
SinogramMask flip_detector_axis(const SinogramMask& mask);

// Symmetric zero-pad (extra row/col goes to the trailing side when odd).
Sinogram pad_sinogram(const Sinogram& sino, int rows, int cols);
SinogramMask pad_mask(const SinogramMask& mask, int rows, int cols);
Sinogram crop_sinogram(const Sinogram& sino, int rows, int cols);
GridF pad_grid(const GridF& g, int rows, int cols);
GridB pad_grid(const GridB& g, int rows, int cols);
GridF crop_grid(const GridF& g, int rows, int cols);
GridB crop_grid(const GridB& g, int rows, int cols);

// Dilation by the discrete disk {dx^2 + dy^2 <= r^2} (shared with recon).
GridB dilate_disk(const GridB& mask, int radius_px);
GridB erode_disk(const GridB& mask, int radius_px);

namespace ref {
// Serial reference projector, kept for the parallel-vs-serial equivalence
// tests and the benchmark.
Sinogram forward_project(const Image& mu_map, const ScanGeometry& geom);
}  // namespace ref

}  // namespace ctmar
