#pragma once

#include <complex>
#include <vector>

#include "ctmar/projector.hpp"

namespace ctmar {

enum class FbpFilter { RamLak, Hann };

struct FbpConfig {
    FbpFilter filter = FbpFilter::RamLak;
    int n_pixels = 0;  // 0: match n_detectors
};

struct MhuConfig {
    double mu_water = 0.202527;  // cm^-1
    double offset = 1000.0;
    double scale = 1000.0;
};

// Filtered back projection: per-angle ramp filtering in the frequency domain
// (rows zero-padded to the next power of two >= 2x detectors), then linear
// back projection over the inscribed circle, scaled by pi/n_angles so a mu
// map in cm^-1 round-trips.
Image fbp(const Sinogram& sino, const FbpConfig& config = {});

// In-place radix-2 FFT (size must be a power of two); inverse includes 1/n.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse);

GridF to_mhu(const GridF& mu, const MhuConfig& config = {});

// threshold >= 4000 MHU, erode disk-2, dilate disk-4 (erosion drops very
// small blobs, dilation over-segments the rest)
GridB segment_metal(const Image& recon, double threshold_mhu = 4000.0, int erode_r = 2, int dilate_r = 4,
                    const MhuConfig& mhu = {});

// Metal pixels copied from the uncorrected image, everything else from the
// corrected one.
Image reinsert_metal(const Image& corrected, const GridB& image_metal_mask, const Image& uncorrected);

namespace ref {
// Serial back projection of pre-filtered rows (shared filtering), for the
// parallel-vs-serial equivalence test and the benchmark.
Image fbp(const Sinogram& sino, const FbpConfig& config = {});
}

}  // namespace ctmar
