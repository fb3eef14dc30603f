#include "ctmar/projector.hpp"

#include <cmath>

#include "ray_detail.hpp"

namespace ctmar {

void ScanGeometry::validate() const {
    if (n_angles < 1) throw validation_error("geometry: n_angles must be >= 1");
    if (n_detectors < 2) throw validation_error("geometry: n_detectors must be >= 2");
    if (fov_mm <= 0.0) throw validation_error("geometry: fov must be positive");
    if (pad_rows != 0 || pad_cols != 0) {
        if (pad_rows < n_angles || pad_cols < n_detectors)
            throw validation_error("geometry: pad shape smaller than native shape");
    }
}

std::uint64_t ScanGeometry::hash() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "par:%d:%d:%.9g:%d:%d", n_angles, n_detectors, fov_mm, pad_rows,
                  pad_cols);
    return fnv1a64(buf);
}

std::string sino_unit_name(SinoUnit u) {
    return u == SinoUnit::LineIntegral ? "line_integral" : "normalized_measurement";
}

SinoUnit sino_unit_from_name(const std::string& name) {
    if (name == "line_integral") return SinoUnit::LineIntegral;
    if (name == "normalized_measurement") return SinoUnit::NormalizedMeasurement;
    throw validation_error("unknown sinogram unit tag '" + name + "'");
}

Sinogram ref::forward_project(const Image& mu_map, const ScanGeometry& geom) {
    detail::validate_projection_input(mu_map, geom);

    Sinogram out;
    out.geom = geom;
    out.unit = SinoUnit::LineIntegral;
    out.values = GridF(geom.n_angles, geom.n_detectors, 0.0f);
    const double half_extent = 0.5 * mu_map.pixel_pitch_mm * mu_map.values.rows;
    for (int a = 0; a < geom.n_angles; ++a) {
        double theta = geom.angle_rad(a);
        double c = std::cos(theta), s = std::sin(theta);
        float* row = out.values.row(a);
        for (int d = 0; d < geom.n_detectors; ++d)
            row[d] = static_cast<float>(detail::integrate_ray(mu_map.values, mu_map.pixel_pitch_mm, c, s,
                                                              geom.detector_s_mm(d), half_extent));
    }
    return out;
}

Sinogram forward_project(const Image& mu_map, const ScanGeometry& geom) {
    detail::validate_projection_input(mu_map, geom);

    Sinogram out;
    out.geom = geom;
    out.unit = SinoUnit::LineIntegral;
    out.values = GridF(geom.n_angles, geom.n_detectors, 0.0f);
    const double half_extent = 0.5 * mu_map.pixel_pitch_mm * mu_map.values.rows;

    // rays are independent; no cross-ray accumulation, so any thread count
    // produces identical bits
#pragma omp parallel for schedule(static)
    for (int a = 0; a < geom.n_angles; ++a) {
        double theta = geom.angle_rad(a);
        double c = std::cos(theta), s = std::sin(theta);
        float* row = out.values.row(a);
        for (int d = 0; d < geom.n_detectors; ++d) {
            row[d] = static_cast<float>(detail::integrate_ray(mu_map.values, mu_map.pixel_pitch_mm, c, s,
                                                              geom.detector_s_mm(d), half_extent));
        }
    }
    return out;
}

SinogramMask project_metal_mask(const GridB& image_mask, double pixel_pitch_mm,
                                const ScanGeometry& geom, int dilation_radius_px) {
    Image as_float;
    as_float.pixel_pitch_mm = pixel_pitch_mm;
    as_float.values = GridF(image_mask.rows, image_mask.cols);
    for (size_t i = 0; i < image_mask.v.size(); ++i) as_float.values.v[i] = image_mask.v[i] ? 1.0f : 0.0f;

    Sinogram proj = forward_project(as_float, geom);
    SinogramMask out;
    out.values = GridB(proj.values.rows, proj.values.cols, 0);
    constexpr float eps_mask = 1e-6f;
    for (size_t i = 0; i < proj.values.v.size(); ++i) out.values.v[i] = proj.values.v[i] > eps_mask ? 1 : 0;
    if (dilation_radius_px > 0) out.values = dilate_disk(out.values, dilation_radius_px);
    return out;
}

Sinogram apply_mask(const Sinogram& sino, const SinogramMask& mask) {
    if (!sino.values.same_shape(mask.values)) throw validation_error("apply_mask: shape mismatch");
    Sinogram out = sino;
    for (size_t i = 0; i < out.values.v.size(); ++i)
        if (mask.values.v[i]) out.values.v[i] = 0.0f;
    return out;
}

Sinogram flip_detector_axis(const Sinogram& sino) {
    Sinogram out = sino;
    for (int a = 0; a < sino.values.rows; ++a)
        for (int d = 0; d < sino.values.cols; ++d)
            out.values.at(a, d) = sino.values.at(a, sino.values.cols - 1 - d);
    return out;
}

SinogramMask flip_detector_axis(const SinogramMask& mask) {
    SinogramMask out = mask;
    for (int a = 0; a < mask.values.rows; ++a)
        for (int d = 0; d < mask.values.cols; ++d)
            out.values.at(a, d) = mask.values.at(a, mask.values.cols - 1 - d);
    return out;
}

namespace {

template <typename T>
Grid<T> pad_impl(const Grid<T>& g, int rows, int cols) {
    if (rows < g.rows || cols < g.cols) throw validation_error("pad: target smaller than input");
    Grid<T> out(rows, cols, T{});
    int r_off = (rows - g.rows) / 2;  // odd extra goes to the trailing side
    int c_off = (cols - g.cols) / 2;
    for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) out.at(r + r_off, c + c_off) = g.at(r, c);
    return out;
}

template <typename T>
Grid<T> crop_impl(const Grid<T>& g, int rows, int cols) {
    if (rows > g.rows || cols > g.cols) throw validation_error("crop: target larger than input");
    Grid<T> out(rows, cols);
    int r_off = (g.rows - rows) / 2;
    int c_off = (g.cols - cols) / 2;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out.at(r, c) = g.at(r + r_off, c + c_off);
    return out;
}

}  // namespace

GridF pad_grid(const GridF& g, int rows, int cols) { return pad_impl(g, rows, cols); }
GridB pad_grid(const GridB& g, int rows, int cols) { return pad_impl(g, rows, cols); }
GridF crop_grid(const GridF& g, int rows, int cols) { return crop_impl(g, rows, cols); }
GridB crop_grid(const GridB& g, int rows, int cols) { return crop_impl(g, rows, cols); }

Sinogram pad_sinogram(const Sinogram& sino, int rows, int cols) {
    Sinogram out = sino;
    out.values = pad_impl(sino.values, rows, cols);
    return out;
}

SinogramMask pad_mask(const SinogramMask& mask, int rows, int cols) {
    SinogramMask out;
    out.values = pad_impl(mask.values, rows, cols);
    return out;
}

Sinogram crop_sinogram(const Sinogram& sino, int rows, int cols) {
    Sinogram out = sino;
    out.values = crop_impl(sino.values, rows, cols);
    return out;
}

namespace {

std::vector<std::pair<int, int>> disk_offsets(int radius_px) {
    std::vector<std::pair<int, int>> off;
    for (int dy = -radius_px; dy <= radius_px; ++dy)
        for (int dx = -radius_px; dx <= radius_px; ++dx)
            if (dy * dy + dx * dx <= radius_px * radius_px) off.emplace_back(dy, dx);
    return off;
}

}  // namespace

GridB dilate_disk(const GridB& mask, int radius_px) {
    if (radius_px < 0) throw validation_error("dilate: radius must be >= 0");
    if (radius_px == 0) return mask;
    auto off = disk_offsets(radius_px);
    GridB out(mask.rows, mask.cols, 0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < mask.rows; ++r)
        for (int c = 0; c < mask.cols; ++c) {
            std::uint8_t hit = 0;
            for (auto& [dy, dx] : off) {
                int rr = r + dy, cc = c + dx;
                if (rr < 0 || rr >= mask.rows || cc < 0 || cc >= mask.cols) continue;
                if (mask.at(rr, cc)) {
                    hit = 1;
                    break;
                }
            }
            out.at(r, c) = hit;
        }
    return out;
}

GridB erode_disk(const GridB& mask, int radius_px) {
    if (radius_px < 0) throw validation_error("erode: radius must be >= 0");
    if (radius_px == 0) return mask;
    auto off = disk_offsets(radius_px);
    GridB out(mask.rows, mask.cols, 0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < mask.rows; ++r)
        for (int c = 0; c < mask.cols; ++c) {
            std::uint8_t all = 1;
            for (auto& [dy, dx] : off) {
                int rr = r + dy, cc = c + dx;
                if (rr < 0 || rr >= mask.rows || cc < 0 || cc >= mask.cols || !mask.at(rr, cc)) {
                    all = 0;  // out of bounds counts as false
                    break;
                }
            }
            out.at(r, c) = all;
        }
    return out;
}

}  // namespace ctmar
