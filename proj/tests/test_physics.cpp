#include <cmath>

#include "ctmar/physics.hpp"
#include "doctest.h"

using namespace ctmar;

namespace {

std::vector<GridF> const_stack(const std::vector<double>& p_values, int rows = 1, int cols = 1) {
    std::vector<GridF> stack;
    for (double p : p_values) stack.push_back(GridF(rows, cols, static_cast<float>(p)));
    return stack;
}

ScanGeometry tiny_geom(int rows = 1, int cols = 1) { return ScanGeometry{rows, cols, 10.0 * cols, 0, 0}; }

}  // namespace

TEST_CASE("default spectrum: 121 energies over 10..130 keV, normalized") {
    SourceSpectrum s = default_spectrum();
    CHECK(s.energies_kev.size() == 121);
    CHECK(s.energies_kev.front() == doctest::Approx(10.0));
    CHECK(s.energies_kev.back() == doctest::Approx(130.0));
    CHECK(s.i0 == doctest::Approx(1.7e5));
    double sum = 0.0;
    for (double w : s.weights) {
        CHECK(w >= 0.0);
        sum += w;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
    s.validate();
}

TEST_CASE("expected intensities: blank scan and ln 2 attenuation") {
    SourceSpectrum s = default_spectrum(3, 20.0, 120.0, 1000.0);
    DetectorModel det;
    auto blank = expected_intensities(const_stack({0.0, 0.0, 0.0}), s, det);
    for (size_t i = 0; i < 3; ++i)
        CHECK(blank[i].v[0] == doctest::Approx(s.i0 * s.weights[i]).epsilon(1e-6));

    SourceSpectrum mono = default_spectrum(1, 60.0, 130.0, 1000.0);
    auto half = expected_intensities(const_stack({std::log(2.0)}), mono, det);
    CHECK(half[0].v[0] == doctest::Approx(0.5 * mono.i0 * mono.weights[0]).epsilon(1e-6));

    CHECK_THROWS_AS(expected_intensities(const_stack({-0.5}), mono, det), validation_error);
    CHECK_THROWS_AS(expected_intensities(const_stack({0.0, 0.0}), mono, det), validation_error);
}

TEST_CASE("expected intensities: N=2 hand-computed vector") {
    SourceSpectrum s;
    s.energies_kev = {40.0, 80.0};
    s.weights = {0.25, 0.75};
    s.i0 = 2000.0;
    DetectorModel det;
    auto out = expected_intensities(const_stack({1.0, 0.5}), s, det);
    CHECK(out[0].v[0] == doctest::Approx(2000.0 * 0.25 * std::exp(-1.0)).epsilon(1e-6));
    CHECK(out[1].v[0] == doctest::Approx(2000.0 * 0.75 * std::exp(-0.5)).epsilon(1e-6));
}

TEST_CASE("noiseless measure: single energy returns the line integral exactly") {
    SourceSpectrum mono = default_spectrum(1, 60.0, 130.0, 1.7e5);
    DetectorModel det;
    NoiseConfig off;
    for (double p : {0.0, 0.37, 2.0, 11.5}) {
        Sinogram y = measure(const_stack({p}), mono, det, off, tiny_geom());
        CHECK(std::abs(y.values.v[0] - p) <= 1e-6);
        CHECK(y.unit == SinoUnit::NormalizedMeasurement);
    }
}

TEST_CASE("noiseless measure: blank scan gives zero at all energies") {
    SourceSpectrum s = default_spectrum(13, 10.0, 130.0, 1.7e5);
    DetectorModel det;
    NoiseConfig off;
    Sinogram y = measure(const_stack(std::vector<double>(13, 0.0), 3, 4), s, det, off, tiny_geom(3, 4));
    for (float v : y.values.v) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("noiseless measure: two-energy hand-computed value") {
    // eta = (0.5, 0.5), g = (0.1, 0.2), p = (1.0, 0.5)
    SourceSpectrum s;
    s.energies_kev = {0.1 / 2.6e-3, 0.2 / 2.6e-3};  // gains 0.1 and 0.2 under the gamma*E rule
    s.weights = {0.5, 0.5};
    s.i0 = 1.0e4;
    DetectorModel det;
    NoiseConfig off;
    Sinogram y = measure(const_stack({1.0, 0.5}), s, det, off, tiny_geom());
    double expect = -std::log((0.05 * std::exp(-1.0) + 0.1 * std::exp(-0.5)) / 0.15);
    CHECK(y.values.v[0] == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("noiseless measure is independent of the noise seed") {
    SourceSpectrum s = default_spectrum(5, 10.0, 130.0, 1.7e5);
    DetectorModel det;
    NoiseConfig a;
    a.seed = 1;
    NoiseConfig b;
    b.seed = 999;
    auto stack = const_stack({0.1, 0.4, 0.9, 1.6, 2.5}, 2, 3);
    Sinogram ya = measure(stack, s, det, a, tiny_geom(2, 3));
    Sinogram yb = measure(stack, s, det, b, tiny_geom(2, 3));
    CHECK(ya.values == yb.values);
}

TEST_CASE("monotonicity: increasing any line integral never decreases y (noise off)") {
    SourceSpectrum s = default_spectrum(7, 10.0, 130.0, 1.7e5);
    DetectorModel det;
    NoiseConfig off;
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> p(7);
        for (double& x : p) x = rng.uniform(0.0, 4.0);
        Sinogram y0 = measure(const_stack(p), s, det, off, tiny_geom());
        size_t which = static_cast<size_t>(rng.uniform_int(0, 6));
        p[which] += rng.uniform(0.0, 2.0);
        Sinogram y1 = measure(const_stack(p), s, det, off, tiny_geom());
        CHECK(y1.values.v[0] >= y0.values.v[0]);
    }
}

TEST_CASE("measure with noise: seeded determinism and thread independence") {
    SourceSpectrum s = default_spectrum(5, 10.0, 130.0, 1.7e5);
    DetectorModel det;
    NoiseConfig noise{true, true, 42, 1e3};
    auto stack = const_stack({0.2, 0.5, 1.0, 2.0, 3.0}, 8, 16);
    Sinogram a = measure(stack, s, det, noise, tiny_geom(8, 16));
    Sinogram b = measure(stack, s, det, noise, tiny_geom(8, 16));
    CHECK(a.values == b.values);
    Sinogram c = ref::measure(stack, s, det, noise, tiny_geom(8, 16));
    CHECK(a.values == c.values);
}

TEST_CASE("poisson sampler: exact and normal-approx moments") {
    // exact path
    for (double mean : {3.0, 40.0, 600.0}) {
        Rng rng(7);
        const int n = 20000;
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            double x = static_cast<double>(sample_poisson(rng, mean, 1e3));
            sum += x;
            sq += x * x;
        }
        double m = sum / n;
        double var = sq / n - m * m;
        CHECK(std::abs(m - mean) <= 4.0 * std::sqrt(mean / n));
        CHECK(std::abs(var - mean) / mean < 0.06);
    }
    // switching exact <-> normal approximation moves the variance by < 2%
    {
        const double mean = 900.0;
        const int n = 60000;
        auto var_with_threshold = [&](double thr) {
            Rng rng(11);
            double sum = 0.0, sq = 0.0;
            for (int i = 0; i < n; ++i) {
                double x = static_cast<double>(sample_poisson(rng, mean, thr));
                sum += x;
                sq += x * x;
            }
            double m = sum / n;
            return sq / n - m * m;
        };
        double v_exact = var_with_threshold(1e3);   // 900 <= 1000: exact
        double v_normal = var_with_threshold(100.0);  // 900 > 100: normal approx
        CHECK(std::abs(v_exact - v_normal) / v_exact < 0.02);
    }
}

TEST_CASE("noise statistics: empirical mean and variance of the detector sum") {
    // fixed bin with three energies; compare sum g*counts + electronic noise
    // moments against sum g*I and sum g^2*I + sigma_e^2
    SourceSpectrum s;
    s.energies_kev = {30.0, 60.0, 90.0};
    s.weights = {0.3, 0.5, 0.2};
    s.i0 = 1.7e5;
    DetectorModel det;
    std::vector<double> p = {0.8, 1.1, 0.6};

    std::vector<double> gains, means;
    double expect_mean = 0.0, expect_var = det.sigma_e_sq_pa2;
    for (size_t i = 0; i < 3; ++i) {
        double g = det.gain(s.energies_kev[i]);
        double I = s.i0 * s.weights[i] * std::exp(-p[i]);
        gains.push_back(g);
        means.push_back(I);
        expect_mean += g * I;
        expect_var += g * g * I;
    }

    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        Rng bin_rng(mix_seed(1234, static_cast<std::uint64_t>(i)));
        double acc = 0.0;
        for (size_t e = 0; e < 3; ++e) {
            Rng er(mix_seed(bin_rng.next_u64(), e));
            acc += gains[e] * static_cast<double>(sample_poisson(er, means[e], 1e3));
        }
        acc += std::sqrt(det.sigma_e_sq_pa2) * bin_rng.normal();
        sum += acc;
        sq += acc * acc;
    }
    double emp_mean = sum / n;
    double emp_var = sq / n - emp_mean * emp_mean;
    double se_mean = std::sqrt(expect_var / n);
    CHECK(std::abs(emp_mean - expect_mean) <= 3.0 * se_mean);
    CHECK(std::abs(emp_var - expect_var) / expect_var < 0.05);
}

TEST_CASE("beam hardening: zero thickness, mono-energetic linearity, water sub-linearity") {
    MaterialTable table = build_material_table();
    const Material* water = nullptr;
    for (const Material& m : table)
        if (m.name == "Water") water = &m;
    REQUIRE(water != nullptr);
    DetectorModel det;

    SourceSpectrum mono = default_spectrum(1, 65.0, 130.0, 1.7e5);
    std::vector<double> t{0.0, 1.0, 2.0, 4.0, 8.0};
    auto y_mono = beam_hardening_curve(*water, t, mono, det);
    CHECK(y_mono[0] == doctest::Approx(0.0));
    double slope = y_mono[1] / t[1];
    for (size_t i = 1; i < t.size(); ++i)
        CHECK(y_mono[i] == doctest::Approx(slope * t[i]).epsilon(1e-9));

    SourceSpectrum poly = default_spectrum(121, 10.0, 130.0, 1.7e5);
    std::vector<double> tt;
    for (int k = 1; k <= 30; ++k) tt.push_back(static_cast<double>(k));
    auto y = beam_hardening_curve(*water, tt, poly, det);
    for (size_t i = 1; i < tt.size(); ++i)
        CHECK(y[i] / tt[i] < y[i - 1] / tt[i - 1]);  // y(t)/t strictly decreasing
}

TEST_CASE("spectrum and detector JSON round-trips") {
    SourceSpectrum s = default_spectrum(13, 10.0, 130.0, 1.7e5);
    SourceSpectrum back = spectrum_from_json(spectrum_to_json(s));
    CHECK(back.energies_kev == s.energies_kev);
    CHECK(back.weights == s.weights);
    CHECK(back.i0 == s.i0);

    DetectorModel d;
    DetectorModel db = detector_from_json(detector_to_json(d));
    CHECK(db.gamma_pa_per_quanta_kev == d.gamma_pa_per_quanta_kev);
    CHECK(db.sigma_e_sq_pa2 == d.sigma_e_sq_pa2);
    CHECK_THROWS_AS(spectrum_from_json("{}"), std::exception);
}
