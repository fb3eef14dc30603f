#include "ctmar/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ctmar {

double mse(const GridF& a, const GridF& b) {
    if (!a.same_shape(b)) throw validation_error("mse: shape mismatch");
    if (a.v.empty()) throw validation_error("mse: empty input");
    double acc = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        double d = static_cast<double>(a.v[i]) - static_cast<double>(b.v[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.v.size());
}

double masked_mse(const GridF& a, const GridF& b, const GridB& mask) {
    if (!a.same_shape(b) || a.rows != mask.rows || a.cols != mask.cols)
        throw validation_error("masked_mse: shape mismatch");
    double acc = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        if (!mask.v[i]) continue;
        double d = static_cast<double>(a.v[i]) - static_cast<double>(b.v[i]);
        acc += d * d;
        ++count;
    }
    if (count == 0) throw validation_error("masked_mse: empty mask");
    return acc / static_cast<double>(count);
}

namespace {

std::pair<double, double> min_max(const GridF& g) {
    double lo = g.v[0], hi = g.v[0];
    for (float f : g.v) {
        lo = std::min(lo, static_cast<double>(f));
        hi = std::max(hi, static_cast<double>(f));
    }
    return {lo, hi};
}

}  // namespace

double psnr(const GridF& reference, const GridF& test, double peak) {
    double e = mse(reference, test);
    if (peak <= 0.0) {
        auto [lo, hi] = min_max(reference);
        peak = hi - lo;
    }
    if (e == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / e);
}

double ssim(const GridF& reference, const GridF& test, const SsimConfig& config) {
    if (!reference.same_shape(test)) throw validation_error("ssim: shape mismatch");
    const int w = config.window;
    if (reference.rows < w || reference.cols < w)
        throw validation_error("ssim: image smaller than the window");

    double range = config.dynamic_range;
    if (range <= 0.0) {
        auto [lo, hi] = min_max(reference);
        range = hi - lo;
    }
    if (range <= 0.0) throw validation_error("ssim: degenerate dynamic range");
    const double c1 = config.k1 * range * config.k1 * range;
    const double c2 = config.k2 * range * config.k2 * range;

    // normalized Gaussian window
    std::vector<double> kern(static_cast<size_t>(w) * w);
    double sum = 0.0;
    const double half = 0.5 * (w - 1);
    for (int r = 0; r < w; ++r)
        for (int c = 0; c < w; ++c) {
            double dy = r - half, dx = c - half;
            double g = std::exp(-(dx * dx + dy * dy) / (2.0 * config.sigma * config.sigma));
            kern[static_cast<size_t>(r) * w + c] = g;
            sum += g;
        }
    for (double& g : kern) g /= sum;

    const int out_rows = reference.rows - w + 1;
    const int out_cols = reference.cols - w + 1;
    // per-row sums first, serial total after: the result must not depend on
    // the thread count
    std::vector<double> row_sums(static_cast<size_t>(out_rows), 0.0);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < out_rows; ++r) {
        double row_acc = 0.0;
        for (int c = 0; c < out_cols; ++c) {
            double mu_x = 0, mu_y = 0, xx = 0, yy = 0, xy = 0;
            for (int kr = 0; kr < w; ++kr)
                for (int kc = 0; kc < w; ++kc) {
                    double k = kern[static_cast<size_t>(kr) * w + kc];
                    double x = reference.at(r + kr, c + kc);
                    double y = test.at(r + kr, c + kc);
                    mu_x += k * x;
                    mu_y += k * y;
                    xx += k * x * x;
                    yy += k * y * y;
                    xy += k * x * y;
                }
            double var_x = xx - mu_x * mu_x;
            double var_y = yy - mu_y * mu_y;
            double cov = xy - mu_x * mu_y;
            double s = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)) /
                       ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
            row_acc += s;
        }
        row_sums[static_cast<size_t>(r)] = row_acc;
    }
    double acc = 0.0;
    for (double s : row_sums) acc += s;
    return acc / (static_cast<double>(out_rows) * out_cols);
}

AttentionMap attention_map(const Completer& completer, const Sinogram& x, const SinogramMask& mask,
                           const Sinogram& reference, const AttentionConfig& config) {
    if (!x.values.same_shape(mask.values) || !x.values.same_shape(reference.values))
        throw validation_error("attention_map: shape mismatch");
    if (config.patch < 1 || config.stride < 1) throw validation_error("attention_map: bad patch/stride");

    double m = 0.0;
    for (float f : x.values.v) m = std::max(m, static_cast<double>(f));
    if (m <= 0.0) throw validation_error("attention_map: degenerate all-zero sinogram");

    auto completion_mse = [&](const Sinogram& input) {
        Sinogram done = completer(input, mask);
        return config.whole_sinogram_mse ? mse(done.values, reference.values)
                                         : masked_mse(done.values, reference.values, mask.values);
    };

    AttentionMap out;
    out.patch = config.patch;
    out.stride = config.stride;
    out.baseline_mse = completion_mse(x);

    // positions anchored at 0; trailing partials dropped
    const int pos_rows = (x.values.rows - config.patch) / config.stride + 1;
    const int pos_cols = (x.values.cols - config.patch) / config.stride + 1;
    if (pos_rows < 1 || pos_cols < 1) throw validation_error("attention_map: sinogram smaller than patch");
    out.values = Grid<double>(pos_rows, pos_cols, 0.0);

#pragma omp parallel for schedule(dynamic, 1)
    for (int pr = 0; pr < pos_rows; ++pr) {
        for (int pc = 0; pc < pos_cols; ++pc) {
            Sinogram perturbed = x;
            Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(pr) * pos_cols + pc));
            int r0 = pr * config.stride, c0 = pc * config.stride;
            for (int r = r0; r < r0 + config.patch; ++r)
                for (int c = c0; c < c0 + config.patch; ++c)
                    perturbed.values.at(r, c) = static_cast<float>(rng.uniform(0.0, m));
            double e = completion_mse(perturbed);
            out.values.at(pr, pc) =
                e > 0.0 ? std::log10(e) : -std::numeric_limits<double>::infinity();
        }
    }
    return out;
}

}  // namespace ctmar
