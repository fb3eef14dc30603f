#include "ctmar/recon.hpp"

#include <cmath>

namespace ctmar {

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw numeric_error("fft: size must be a power of two");
    // bit-reversal permutation
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * 3.14159265358979323846 / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                std::complex<double> u = a[i + j];
                std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

namespace {

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Frequency response of the discrete ramp, built from its spatial-domain
// samples (h[0] = 1/(4 d^2), h[odd n] = -1/(pi n d)^2) rather than |f|
// directly; this keeps the DC term honest.
std::vector<double> ramp_response(size_t m, double delta_s_cm, FbpFilter filter) {
    std::vector<std::complex<double>> h(m, {0.0, 0.0});
    const double pi = 3.14159265358979323846;
    h[0] = 1.0 / (4.0 * delta_s_cm * delta_s_cm);
    for (size_t k = 1; k < m / 2; k += 2) {
        double val = -1.0 / (pi * pi * static_cast<double>(k) * static_cast<double>(k) * delta_s_cm * delta_s_cm);
        h[k] = val;
        h[m - k] = val;  // negative tap
    }
    fft_radix2(h, false);
    std::vector<double> resp(m);
    for (size_t k = 0; k < m; ++k) {
        double r = h[k].real();
        if (filter == FbpFilter::Hann) r *= 0.5 + 0.5 * std::cos(2.0 * pi * static_cast<double>(k) / static_cast<double>(m));
        resp[k] = r;
    }
    return resp;
}

// Ramp-filtered detector rows, double precision, one row per angle.
std::vector<std::vector<double>> filter_rows(const Sinogram& sino, FbpFilter filter) {
    const int n_angles = sino.values.rows;
    const int n_det = sino.values.cols;
    const double ds = sino.geom.detector_pitch_mm() * 0.1;  // cm
    const size_t m = next_pow2(static_cast<size_t>(2 * n_det));
    const std::vector<double> resp = ramp_response(m, ds, filter);

    std::vector<std::vector<double>> rows(static_cast<size_t>(n_angles));
#pragma omp parallel for schedule(static)
    for (int a = 0; a < n_angles; ++a) {
        std::vector<std::complex<double>> buf(m, {0.0, 0.0});
        for (int d = 0; d < n_det; ++d) buf[static_cast<size_t>(d)] = sino.values.at(a, d);
        fft_radix2(buf, false);
        for (size_t k = 0; k < m; ++k) buf[k] *= resp[k];
        fft_radix2(buf, true);
        std::vector<double>& row = rows[static_cast<size_t>(a)];
        row.resize(static_cast<size_t>(n_det));
        for (int d = 0; d < n_det; ++d) row[static_cast<size_t>(d)] = buf[static_cast<size_t>(d)].real() * ds;
    }
    return rows;
}

struct BackprojectSetup {
    int n_px = 0;
    double pitch_mm = 0.0;
    std::vector<double> cos_t, sin_t;
};

BackprojectSetup backproject_setup(const Sinogram& sino, const FbpConfig& config) {
    BackprojectSetup s;
    s.n_px = config.n_pixels > 0 ? config.n_pixels : sino.geom.n_detectors;
    if (s.n_px < 2) throw validation_error("fbp: n_pixels must be >= 2");
    s.pitch_mm = sino.geom.fov_mm / s.n_px;
    s.cos_t.resize(static_cast<size_t>(sino.values.rows));
    s.sin_t.resize(static_cast<size_t>(sino.values.rows));
    for (int a = 0; a < sino.values.rows; ++a) {
        double theta = sino.geom.angle_rad(a);
        s.cos_t[static_cast<size_t>(a)] = std::cos(theta);
        s.sin_t[static_cast<size_t>(a)] = std::sin(theta);
    }
    return s;
}

// One image row of the back projection; linear interpolation between
// detector bins, zero outside the measured range.
void backproject_row(const std::vector<std::vector<double>>& rows, const Sinogram& sino,
                     const BackprojectSetup& setup, int r, float* out_row) {
    const int n_angles = sino.values.rows;
    const int n_det = sino.values.cols;
    const double det_pitch = sino.geom.detector_pitch_mm();
    const double scale = 3.14159265358979323846 / n_angles;
    const double radius = 0.5 * sino.geom.fov_mm;
    const int n = setup.n_px;
    double y = (r + 0.5 - 0.5 * n) * setup.pitch_mm;
    for (int c = 0; c < n; ++c) {
        double x = (c + 0.5 - 0.5 * n) * setup.pitch_mm;
        if (x * x + y * y > radius * radius) {
            out_row[c] = 0.0f;  // parallel-beam data only determines the FOV disk
            continue;
        }
        double acc = 0.0;
        for (int a = 0; a < n_angles; ++a) {
            double s_mm = x * setup.cos_t[static_cast<size_t>(a)] + y * setup.sin_t[static_cast<size_t>(a)];
            double u = s_mm / det_pitch + 0.5 * n_det - 0.5;
            int u0 = static_cast<int>(std::floor(u));
            double w = u - u0;
            double v0 = (u0 >= 0 && u0 < n_det) ? rows[static_cast<size_t>(a)][static_cast<size_t>(u0)] : 0.0;
            double v1 = (u0 + 1 >= 0 && u0 + 1 < n_det) ? rows[static_cast<size_t>(a)][static_cast<size_t>(u0 + 1)] : 0.0;
            acc += (1.0 - w) * v0 + w * v1;
        }
        out_row[c] = static_cast<float>(acc * scale);
    }
}

void validate_fbp_input(const Sinogram& sino) {
    sino.geom.validate();
    if (sino.values.rows != sino.geom.n_angles || sino.values.cols != sino.geom.n_detectors)
        throw validation_error("fbp: sinogram shape does not match geometry");
    for (float f : sino.values.v)
        if (!std::isfinite(f)) throw validation_error("fbp: non-finite sinogram value");
}

}  // namespace

Image fbp(const Sinogram& sino, const FbpConfig& config) {
    validate_fbp_input(sino);
    auto rows = filter_rows(sino, config.filter);
    BackprojectSetup setup = backproject_setup(sino, config);

    Image out;
    out.pixel_pitch_mm = setup.pitch_mm;
    out.provenance = "uncorrected";
    out.values = GridF(setup.n_px, setup.n_px, 0.0f);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < setup.n_px; ++r) backproject_row(rows, sino, setup, r, out.values.row(r));
    return out;
}

Image ref::fbp(const Sinogram& sino, const FbpConfig& config) {
    validate_fbp_input(sino);
    auto rows = filter_rows(sino, config.filter);
    BackprojectSetup setup = backproject_setup(sino, config);

    Image out;
    out.pixel_pitch_mm = setup.pitch_mm;
    out.provenance = "uncorrected";
    out.values = GridF(setup.n_px, setup.n_px, 0.0f);
    for (int r = 0; r < setup.n_px; ++r) backproject_row(rows, sino, setup, r, out.values.row(r));
    return out;
}

GridF to_mhu(const GridF& mu, const MhuConfig& config) {
    if (config.mu_water <= 0.0) throw validation_error("mhu: mu_water must be positive");
    GridF out(mu.rows, mu.cols);
    for (size_t i = 0; i < mu.v.size(); ++i)
        out.v[i] = static_cast<float>(config.offset +
                                      config.scale * (mu.v[i] - config.mu_water) / config.mu_water);
    return out;
}

GridB segment_metal(const Image& recon, double threshold_mhu, int erode_r, int dilate_r,
                    const MhuConfig& mhu) {
    GridF m = to_mhu(recon.values, mhu);
    GridB mask(m.rows, m.cols, 0);
    for (size_t i = 0; i < m.v.size(); ++i) mask.v[i] = m.v[i] >= threshold_mhu ? 1 : 0;
    mask = erode_disk(mask, erode_r);
    mask = dilate_disk(mask, dilate_r);
    return mask;
}

Image reinsert_metal(const Image& corrected, const GridB& image_metal_mask, const Image& uncorrected) {
    if (!corrected.values.same_shape(uncorrected.values) ||
        corrected.values.rows != image_metal_mask.rows || corrected.values.cols != image_metal_mask.cols)
        throw validation_error("reinsert_metal: shape mismatch");
    Image out = corrected;
    for (size_t i = 0; i < out.values.v.size(); ++i)
        if (image_metal_mask.v[i]) out.values.v[i] = uncorrected.values.v[i];
    return out;
}

}  // namespace ctmar
