#pragma once

#include "ctmar/projector.hpp"

namespace ctmar {

struct WnnConfig {
    int k_neighbors = 8;
    double weight_angle = 1.0;    // axis weights of the (angle, detector) index metric
    double weight_detector = 1.0;
    double exponent = 1.0;        // weights proportional to 1/d^p
    double mu_wnn = 0.0;          // weight of the original masked value (fixed 0)
};

// Per angle row: each maximal masked run is filled by linear interpolation
// between its nearest unmasked neighbors; runs touching a row edge hold the
// single available neighbor; fully masked rows are filled with 0.
Sinogram li_mar(const Sinogram& sino, const SinogramMask& mask);

// Each masked bin becomes the 1/d^p-weighted mean of its k nearest unmasked
// bins under the weighted Euclidean index metric; distance ties break on
// (lower angle index, lower detector index).
Sinogram wnn_mar(const Sinogram& sino, const SinogramMask& mask, const WnnConfig& config = {});

namespace ref {
// Exhaustive all-pairs nearest-neighbor version (the oracle the ring-search
// implementation must match bit-exactly).
Sinogram wnn_mar(const Sinogram& sino, const SinogramMask& mask, const WnnConfig& config = {});
}

}  // namespace ctmar
