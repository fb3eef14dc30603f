#pragma once

#include <cmath>
#include <vector>

#include "ctmar/physics.hpp"

// Per-bin measurement evaluation shared by the OpenMP kernel and the serial
// reference. Randomness is keyed on (seed, angle, detector, energy) so the
// result is independent of evaluation order.

namespace ctmar::detail {

struct MeasureContext {
    const SourceSpectrum& spectrum;
    const DetectorModel& detector;
    const NoiseConfig& noise;
    std::vector<double> gains;
    double denom = 0.0;

    MeasureContext(const SourceSpectrum& s, const DetectorModel& det, const NoiseConfig& n)
        : spectrum(s), detector(det), noise(n) {
        gains.reserve(s.energies_kev.size());
        for (size_t i = 0; i < s.energies_kev.size(); ++i) {
            gains.push_back(det.gain(s.energies_kev[i]));
            denom += gains[i] * s.i0 * s.weights[i];
        }
    }
};

inline float measure_bin(const MeasureContext& ctx, const std::vector<GridF>& stack, int angle, int det) {
    const size_t n = stack.size();
    double acc = 0.0;
    std::uint64_t bin_key = mix_seed(mix_seed(ctx.noise.seed, static_cast<std::uint64_t>(angle)),
                                     static_cast<std::uint64_t>(det));
    for (size_t i = 0; i < n; ++i) {
        double p = stack[i].at(angle, det);
        double mean = ctx.spectrum.i0 * ctx.spectrum.weights[i] * std::exp(-p);
        double counts = mean;
        if (ctx.noise.poisson) {
            Rng rng(mix_seed(bin_key, i));
            counts = static_cast<double>(sample_poisson(rng, mean, ctx.noise.poisson_normal_threshold));
        }
        acc += ctx.gains[i] * counts;
    }
    if (ctx.noise.electronic && ctx.detector.sigma_e_sq_pa2 > 0.0) {
        Rng rng(mix_seed(bin_key, n));  // energy slot n = electronic-noise stream
        acc += std::sqrt(ctx.detector.sigma_e_sq_pa2) * rng.normal();
    }
    acc = std::max(acc, 1e-12 * ctx.denom);
    return static_cast<float>(-std::log(acc / ctx.denom));
}

}  // namespace ctmar::detail
