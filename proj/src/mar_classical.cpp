#include "ctmar/mar_classical.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace ctmar {

namespace {

struct Candidate {
    double d2;
    int a, d;
    float value;
};

// total order: distance, then lower angle, then lower detector
inline bool cand_less(const Candidate& x, const Candidate& y) {
    if (x.d2 != y.d2) return x.d2 < y.d2;
    if (x.a != y.a) return x.a < y.a;
    return x.d < y.d;
}

void validate_wnn(const Sinogram& sino, const SinogramMask& mask, const WnnConfig& cfg) {
    if (!sino.values.same_shape(mask.values)) throw validation_error("wnn_mar: shape mismatch");
    if (cfg.k_neighbors < 1) throw validation_error("wnn_mar: k must be >= 1");
    if (cfg.exponent < 0.0) throw validation_error("wnn_mar: exponent must be >= 0");
    if (cfg.weight_angle <= 0.0 || cfg.weight_detector <= 0.0)
        throw validation_error("wnn_mar: axis weights must be positive");
    bool any_unmasked = false;
    for (auto m : mask.values.v)
        if (!m) {
            any_unmasked = true;
            break;
        }
    if (!any_unmasked) throw validation_error("wnn_mar: sinogram is fully masked");
}

// Shared final accumulation: candidates must arrive sorted ascending so the
// ring-search and the exhaustive oracle sum in the same order.
float wnn_value(const std::vector<Candidate>& sorted, const WnnConfig& cfg, float original) {
    double num = 0.0, den = 0.0;
    size_t k = std::min(sorted.size(), static_cast<size_t>(cfg.k_neighbors));
    for (size_t i = 0; i < k; ++i) {
        double w = 1.0 / std::pow(std::sqrt(sorted[i].d2), cfg.exponent);
        num += w * sorted[i].value;
        den += w;
    }
    num += cfg.mu_wnn * original;
    den += cfg.mu_wnn;
    return static_cast<float>(num / den);
}

float wnn_bin_ring(const Sinogram& sino, const SinogramMask& mask, const WnnConfig& cfg, int a0, int d0) {
    const int rows = sino.values.rows, cols = sino.values.cols;
    const double wa2 = cfg.weight_angle * cfg.weight_angle;
    const double wd2 = cfg.weight_detector * cfg.weight_detector;
    const double ring_min_factor = std::min(wa2, wd2);
    const size_t k = static_cast<size_t>(cfg.k_neighbors);

    auto cmp = [](const Candidate& x, const Candidate& y) { return cand_less(x, y); };
    std::priority_queue<Candidate, std::vector<Candidate>, decltype(cmp)> best(cmp);

    auto consider = [&](int a, int d) {
        if (a < 0 || a >= rows || d < 0 || d >= cols || mask.values.at(a, d)) return;
        double da = a - a0, dd = d - d0;
        Candidate c{wa2 * da * da + wd2 * dd * dd, a, d, sino.values.at(a, d)};
        if (best.size() < k) {
            best.push(c);
        } else if (cand_less(c, best.top())) {
            best.pop();
            best.push(c);
        }
    };

    const int max_ring = std::max(rows, cols);
    for (int r = 1; r <= max_ring; ++r) {
        // Chebyshev shell at radius r
        for (int d = d0 - r; d <= d0 + r; ++d) {
            consider(a0 - r, d);
            consider(a0 + r, d);
        }
        for (int a = a0 - r + 1; a <= a0 + r - 1; ++a) {
            consider(a, d0 - r);
            consider(a, d0 + r);
        }
        if (best.size() >= k) {
            double next_min = ring_min_factor * static_cast<double>(r + 1) * static_cast<double>(r + 1);
            // keep expanding on equality: an equally distant bin in a later
            // shell can still win the (angle, detector) tie-break
            if (next_min > best.top().d2) break;
        }
    }

    std::vector<Candidate> sorted;
    sorted.reserve(best.size());
    while (!best.empty()) {
        sorted.push_back(best.top());
        best.pop();
    }
    std::sort(sorted.begin(), sorted.end(), cand_less);
    return wnn_value(sorted, cfg, sino.values.at(a0, d0));
}

}  // namespace

Sinogram li_mar(const Sinogram& sino, const SinogramMask& mask) {
    if (!sino.values.same_shape(mask.values)) throw validation_error("li_mar: shape mismatch");
    Sinogram out = sino;
    const int rows = sino.values.rows, cols = sino.values.cols;
#pragma omp parallel for schedule(static)
    for (int a = 0; a < rows; ++a) {
        const float* in = sino.values.row(a);
        const std::uint8_t* m = mask.values.row(a);
        float* dst = out.values.row(a);
        int c = 0;
        while (c < cols) {
            if (!m[c]) {
                ++c;
                continue;
            }
            int run_start = c;
            while (c < cols && m[c]) ++c;
            int run_end = c - 1;  // inclusive
            bool has_left = run_start > 0;
            bool has_right = run_end < cols - 1;
            if (has_left && has_right) {
                double vl = in[run_start - 1];
                double vr = in[run_end + 1];
                double span = run_end + 1 - (run_start - 1);
                for (int i = run_start; i <= run_end; ++i)
                    dst[i] = static_cast<float>(vl + (vr - vl) * (i - (run_start - 1)) / span);
            } else if (has_left) {
                for (int i = run_start; i <= run_end; ++i) dst[i] = in[run_start - 1];
            } else if (has_right) {
                for (int i = run_start; i <= run_end; ++i) dst[i] = in[run_end + 1];
            } else {
                for (int i = run_start; i <= run_end; ++i) dst[i] = 0.0f;  // fully masked row
            }
        }
    }
    return out;
}

Sinogram wnn_mar(const Sinogram& sino, const SinogramMask& mask, const WnnConfig& config) {
    validate_wnn(sino, mask, config);
    Sinogram out = sino;
    const int rows = sino.values.rows, cols = sino.values.cols;
#pragma omp parallel for schedule(dynamic, 1)
    for (int a = 0; a < rows; ++a)
        for (int d = 0; d < cols; ++d)
            if (mask.values.at(a, d)) out.values.at(a, d) = wnn_bin_ring(sino, mask, config, a, d);
    return out;
}

Sinogram ref::wnn_mar(const Sinogram& sino, const SinogramMask& mask, const WnnConfig& config) {
    validate_wnn(sino, mask, config);
    const int rows = sino.values.rows, cols = sino.values.cols;
    const double wa2 = config.weight_angle * config.weight_angle;
    const double wd2 = config.weight_detector * config.weight_detector;

    Sinogram out = sino;
    for (int a0 = 0; a0 < rows; ++a0)
        for (int d0 = 0; d0 < cols; ++d0) {
            if (!mask.values.at(a0, d0)) continue;
            std::vector<Candidate> all;
            for (int a = 0; a < rows; ++a)
                for (int d = 0; d < cols; ++d) {
                    if (mask.values.at(a, d)) continue;
                    double da = a - a0, dd = d - d0;
                    all.push_back({wa2 * da * da + wd2 * dd * dd, a, d, sino.values.at(a, d)});
                }
            std::sort(all.begin(), all.end(), cand_less);
            out.values.at(a0, d0) = wnn_value(all, config, sino.values.at(a0, d0));
        }
    return out;
}

}  // namespace ctmar
