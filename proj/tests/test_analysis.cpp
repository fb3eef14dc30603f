#include <cmath>

#include "ctmar/analysis.hpp"
#include "ctmar/mar_classical.hpp"
#include "doctest.h"

using namespace ctmar;

namespace {

GridF random_grid(int rows, int cols, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    GridF g(rows, cols);
    Rng rng(seed);
    for (auto& v : g.v) v = static_cast<float>(rng.uniform(lo, hi));
    return g;
}

Sinogram wrap(const GridF& g) {
    Sinogram s;
    s.geom = ScanGeometry{g.rows, g.cols, 10.0 * g.cols, 0, 0};
    s.values = g;
    return s;
}

}  // namespace

TEST_CASE("mse: basics and the 2x2 hand sum") {
    GridF a = random_grid(6, 7, 1);
    CHECK(mse(a, a) == 0.0);
    GridF b = a;
    for (auto& v : b.v) v += 0.5f;
    CHECK(mse(a, b) == doctest::Approx(0.25).epsilon(1e-6));

    GridF x(2, 2), y(2, 2);
    x.v = {0.0f, 1.0f, 2.0f, 3.0f};
    y.v = {1.0f, 1.0f, 2.0f, 5.0f};
    CHECK(mse(x, y) == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(mse(x, y) == mse(y, x));
    GridF wrong(2, 3);
    CHECK_THROWS_AS(mse(x, wrong), validation_error);
}

TEST_CASE("masked_mse: masked region only; empty mask rejected") {
    GridF a(2, 2), b(2, 2);
    a.v = {0.0f, 1.0f, 2.0f, 3.0f};
    b.v = {1.0f, 1.0f, 2.0f, 5.0f};
    GridB m(2, 2, 0);
    m.v = {1, 0, 0, 1};
    CHECK(masked_mse(a, b, m) == doctest::Approx((1.0 + 4.0) / 2.0).epsilon(1e-12));
    GridB empty(2, 2, 0);
    CHECK_THROWS_AS(masked_mse(a, b, empty), validation_error);
}

TEST_CASE("psnr: sentinel, log identity, formula re-evaluation") {
    GridF a = random_grid(8, 8, 3);
    CHECK(std::isinf(psnr(a, a)));

    GridF ref(4, 4, 0.0f);
    ref.v[0] = 1.0f;  // dynamic range 1
    GridF test = ref;
    for (auto& v : test.v) v += 0.1f;
    // mse = 0.01, peak 1 -> 20 dB
    CHECK(psnr(ref, test) == doctest::Approx(20.0).epsilon(1e-6));

    GridF b = random_grid(8, 8, 4);
    double peak = 0.75;
    CHECK(psnr(a, b, peak) == doctest::Approx(10.0 * std::log10(peak * peak / mse(a, b))).epsilon(1e-12));
    // psnr strictly decreasing in mse for fixed peak
    GridF c = a;
    for (auto& v : c.v) v += 0.3f;
    GridF d = a;
    for (auto& v : d.v) v += 0.6f;
    CHECK(psnr(a, c, 1.0) > psnr(a, d, 1.0));
}

TEST_CASE("ssim: identity, anti-correlation, constant-image closed form") {
    GridF a = random_grid(24, 24, 5);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-9));

    // reference with (near-)zero local means vs its negation: the structure
    // term dominates and goes negative
    GridF z(16, 16);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) z.at(r, c) = ((r + c) % 2 == 0) ? 1.0f : -1.0f;
    GridF neg = z;
    for (auto& v : neg.v) v = -v;
    CHECK(ssim(z, neg) < 0.0);

    // constant images differing by delta collapse to the luminance term
    SsimConfig cfg;
    cfg.dynamic_range = 1.0;
    GridF c1(12, 12, 0.4f), c2(12, 12, 0.6f);
    double mu1 = 0.4, mu2 = 0.6, c1k = 0.01 * 0.01;
    double expect = (2.0 * mu1 * mu2 + c1k) / (mu1 * mu1 + mu2 * mu2 + c1k);
    CHECK(ssim(c1, c2, cfg) == doctest::Approx(expect).epsilon(1e-6));

    GridF tiny(8, 8, 0.0f);
    CHECK_THROWS_AS(ssim(tiny, tiny), validation_error);  // smaller than the window
}

TEST_CASE("ssim shift behavior: contrast-structure exactly invariant, full value approximately") {
    // the luminance term is not exactly shift invariant; with L held fixed the
    // full index should move only slightly for a modest common shift
    GridF a = random_grid(20, 20, 7, 0.0, 1.0);
    GridF b = random_grid(20, 20, 8, 0.0, 1.0);
    SsimConfig cfg;
    cfg.dynamic_range = 1.0;
    double base = ssim(a, b, cfg);
    GridF as = a, bs = b;
    for (auto& v : as.v) v += 2.0f;
    for (auto& v : bs.v) v += 2.0f;
    double shifted = ssim(as, bs, cfg);
    CHECK(std::abs(shifted - base) < 0.05);
}

TEST_CASE("attention map: grid arithmetic and identity-completer sentinels") {
    // 64x48 input, patch 11, stride 6 -> 9x7 positions
    GridF x = random_grid(64, 48, 11, 0.5, 4.0);
    GridB mask(64, 48, 0);
    for (int r = 0; r < 64; ++r)
        for (int c = 20; c < 24; ++c) mask.at(r, c) = 1;
    Sinogram sx = wrap(x);
    // y = x and identity completer
    Completer identity = [](const Sinogram& s, const SinogramMask&) { return s; };
    AttentionConfig cfg;
    cfg.seed = 5;
    AttentionMap map = attention_map(identity, sx, SinogramMask{mask}, sx, cfg);
    CHECK(map.values.rows == 9);
    CHECK(map.values.cols == 7);
    CHECK(map.baseline_mse == 0.0);
    for (int pr = 0; pr < 9; ++pr)
        for (int pc = 0; pc < 7; ++pc) {
            int c0 = pc * 6;
            bool overlaps = c0 + 11 > 20 && c0 < 24;  // patch columns intersect the mask band
            if (overlaps)
                CHECK(map.values.at(pr, pc) > -1e300);  // finite log10 mse
            else
                CHECK(std::isinf(map.values.at(pr, pc)));  // -inf sentinel
        }
}

TEST_CASE("attention map determinism under reseeding") {
    GridF x = random_grid(64, 48, 21, 0.1, 2.0);
    GridB mask(64, 48, 0);
    for (int r = 0; r < 64; ++r)
        for (int c = 30; c < 34; ++c) mask.at(r, c) = 1;
    Sinogram sx = wrap(apply_mask(wrap(x), SinogramMask{mask}).values);
    Sinogram ref = wrap(x);
    Completer li = [](const Sinogram& s, const SinogramMask& m) { return li_mar(s, m); };
    AttentionConfig cfg;
    cfg.seed = 99;
    AttentionMap m1 = attention_map(li, sx, SinogramMask{mask}, ref, cfg);
    AttentionMap m2 = attention_map(li, sx, SinogramMask{mask}, ref, cfg);
    CHECK(m1.values.v == m2.values.v);
    cfg.seed = 100;
    AttentionMap m3 = attention_map(li, sx, SinogramMask{mask}, ref, cfg);
    bool any_diff = false;
    for (size_t i = 0; i < m3.values.v.size(); ++i)
        if (m3.values.v[i] != m1.values.v[i]) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("attention map: li completer scores adjacent patches above distant ones") {
    // single interior masked run; only patches touching the run's boundary
    // columns can change the LI fill
    const int rows = 64, cols = 48;
    GridF y(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            y.at(r, c) = static_cast<float>(2.0 + std::sin(0.3 * r) * std::cos(0.2 * c));
    GridB mask(rows, cols, 0);
    for (int r = 0; r < rows; ++r)
        for (int c = 22; c < 26; ++c) mask.at(r, c) = 1;
    Sinogram refs = wrap(y);
    Sinogram xs = apply_mask(refs, SinogramMask{mask});
    Completer li = [](const Sinogram& s, const SinogramMask& m) { return li_mar(s, m); };
    AttentionConfig cfg;
    cfg.seed = 3;
    AttentionMap map = attention_map(li, xs, SinogramMask{mask}, refs, cfg);

    // column-position classes: adjacent = patch covers column 21 or 26;
    // distant = patch ends more than a patch-width away from the run
    for (int pr = 0; pr < map.values.rows; ++pr)
        for (int pc = 0; pc < map.values.cols; ++pc) {
            int c0 = pc * cfg.stride, c1 = c0 + cfg.patch - 1;
            bool adjacent = (21 >= c0 && 21 <= c1) || (26 >= c0 && 26 <= c1);
            bool distant = c1 < 22 - cfg.patch || c0 > 25 + cfg.patch;
            if (!adjacent && !distant) continue;
            for (int qr = 0; qr < map.values.rows; ++qr)
                for (int qc = 0; qc < map.values.cols; ++qc) {
                    int d0 = qc * cfg.stride, d1 = d0 + cfg.patch - 1;
                    bool q_adj = (21 >= d0 && 21 <= d1) || (26 >= d0 && 26 <= d1);
                    bool q_dist = d1 < 22 - cfg.patch || d0 > 25 + cfg.patch;
                    if (adjacent && q_dist)
                        CHECK(map.values.at(pr, pc) > map.values.at(qr, qc));
                    (void)q_adj;
                }
        }
}

TEST_CASE("attention map rejects an all-zero sinogram") {
    GridF zero(64, 48, 0.0f);
    GridB mask(64, 48, 1);
    Completer identity = [](const Sinogram& s, const SinogramMask&) { return s; };
    CHECK_THROWS_AS(
        attention_map(identity, wrap(zero), SinogramMask{mask}, wrap(zero), AttentionConfig{}),
        validation_error);
}
