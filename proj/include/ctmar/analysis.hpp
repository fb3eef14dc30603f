#pragma once

#include <functional>

#include "ctmar/projector.hpp"

namespace ctmar {

struct SsimConfig {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    // dynamic range; <= 0 means max(reference) - min(reference)
    double dynamic_range = 0.0;
};

struct AttentionConfig {
    int patch = 11;
    int stride = 6;
    std::uint64_t seed = 0;
    bool whole_sinogram_mse = false;  // default: masked-region MSE only
};

double mse(const GridF& a, const GridF& b);
double masked_mse(const GridF& a, const GridF& b, const GridB& mask);

// 10*log10(peak^2 / mse); identical inputs return +infinity.
double psnr(const GridF& reference, const GridF& test, double peak = 0.0);  // peak<=0: dynamic range of reference

// Mean of the local SSIM map, Gaussian-weighted windows fully inside the
// image (no padding).
double ssim(const GridF& reference, const GridF& test, const SsimConfig& config = {});

using Completer = std::function<Sinogram(const Sinogram&, const SinogramMask&)>;

struct AttentionMap {
    Grid<double> values;       // log10 MSE per patch position; -inf where MSE == 0
    double baseline_mse = 0.0;
    int patch = 11, stride = 6;
};

// Occlusion sensitivity: per patch position on the stride grid, overwrite the
// patch of x with fresh U(0, max(x)) noise (mask unchanged), re-run the
// completer, and record log10 of the masked-region completion MSE at the
// patch center. Noise is keyed per position, so visit order doesn't matter.
AttentionMap attention_map(const Completer& completer, const Sinogram& x, const SinogramMask& mask,
                           const Sinogram& reference, const AttentionConfig& config = {});

}  // namespace ctmar
