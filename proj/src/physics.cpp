#include "ctmar/physics.hpp"

#include <cmath>

#include "json.hpp"
#include "measure_detail.hpp"

namespace ctmar {

void SourceSpectrum::validate() const {
    if (energies_kev.empty()) throw validation_error("spectrum: needs at least one energy");
    if (energies_kev.size() != weights.size()) throw validation_error("spectrum: energies/weights size mismatch");
    bool any_positive = false;
    for (size_t i = 0; i < energies_kev.size(); ++i) {
        if (i > 0 && energies_kev[i] <= energies_kev[i - 1])
            throw validation_error("spectrum: energies must be strictly increasing");
        if (weights[i] < 0.0) throw validation_error("spectrum: weights must be >= 0");
        if (weights[i] > 0.0) any_positive = true;
    }
    if (!any_positive) throw validation_error("spectrum: all weights are zero");
    if (i0 <= 0.0) throw validation_error("spectrum: I0 must be positive");
}

void DetectorModel::validate() const {
    if (gamma_pa_per_quanta_kev <= 0.0) throw validation_error("detector: gamma must be positive");
    if (sigma_e_sq_pa2 < 0.0) throw validation_error("detector: sigma_e^2 must be >= 0");
}

SourceSpectrum default_spectrum(int n_energies, double lo_kev, double hi_kev, double i0) {
    if (n_energies < 1) throw validation_error("spectrum: n_energies must be >= 1");
    if (lo_kev <= 0.0 || hi_kev <= lo_kev) throw validation_error("spectrum: bad energy range");
    SourceSpectrum s;
    s.i0 = i0;
    s.energies_kev.resize(n_energies);
    s.weights.resize(n_energies);
    double sum = 0.0;
    for (int i = 0; i < n_energies; ++i) {
        double e = n_energies == 1 ? lo_kev : lo_kev + (hi_kev - lo_kev) * i / (n_energies - 1);
        s.energies_kev[i] = e;
        double w = hi_kev * (hi_kev - e) / e;  // Kramers falloff
        if (w < 0.0) w = 0.0;
        s.weights[i] = w;
        sum += w;
    }
    if (sum <= 0.0) {
        // single-energy degenerate case (e == hi): flat weight
        for (double& w : s.weights) w = 1.0;
        sum = static_cast<double>(n_energies);
    }
    for (double& w : s.weights) w /= sum;
    return s;
}

std::vector<GridF> line_integral_stack(const LabelImage& labels, const MaterialTable& table,
                                       const SourceSpectrum& spectrum, const ScanGeometry& geom) {
    spectrum.validate();
    std::vector<GridF> stack;
    stack.reserve(spectrum.energies_kev.size());
    for (double e : spectrum.energies_kev) {
        Image mu;
        mu.values = attenuation_at(labels, e, table);
        mu.pixel_pitch_mm = labels.pixel_pitch_mm;
        stack.push_back(forward_project(mu, geom).values);
    }
    return stack;
}

std::vector<GridF> expected_intensities(const std::vector<GridF>& stack, const SourceSpectrum& spectrum,
                                        const DetectorModel& detector) {
    spectrum.validate();
    detector.validate();
    if (stack.size() != spectrum.energies_kev.size())
        throw validation_error("expected_intensities: stack depth != spectrum size");
    std::vector<GridF> out;
    out.reserve(stack.size());
    for (size_t i = 0; i < stack.size(); ++i) {
        const GridF& p = stack[i];
        GridF g(p.rows, p.cols);
        double i_tilde = spectrum.i0 * spectrum.weights[i];
        for (size_t k = 0; k < p.v.size(); ++k) {
            if (!(p.v[k] >= 0.0f))
                throw validation_error("expected_intensities: negative or non-finite line integral");
            g.v[k] = static_cast<float>(i_tilde * std::exp(-static_cast<double>(p.v[k])));
        }
        out.push_back(std::move(g));
    }
    return out;
}

namespace {

void validate_measure_input(const std::vector<GridF>& stack, const SourceSpectrum& spectrum,
                            const DetectorModel& detector, const ScanGeometry& geom) {
    spectrum.validate();
    detector.validate();
    if (stack.size() != spectrum.energies_kev.size())
        throw validation_error("measure: stack depth != spectrum size");
    for (const GridF& p : stack) {
        if (p.rows != geom.n_angles || p.cols != geom.n_detectors)
            throw validation_error("measure: stack shape does not match geometry");
        for (float f : p.v)
            if (!std::isfinite(f)) throw validation_error("measure: non-finite line integral");
    }
}

}  // namespace

Sinogram measure(const std::vector<GridF>& stack, const SourceSpectrum& spectrum,
                 const DetectorModel& detector, const NoiseConfig& noise, const ScanGeometry& geom) {
    validate_measure_input(stack, spectrum, detector, geom);
    detail::MeasureContext ctx(spectrum, detector, noise);

    Sinogram out;
    out.geom = geom;
    out.unit = SinoUnit::NormalizedMeasurement;
    out.values = GridF(geom.n_angles, geom.n_detectors);

    // per-bin counter-based RNG streams; no shared state between bins
#pragma omp parallel for schedule(static)
    for (int a = 0; a < geom.n_angles; ++a)
        for (int d = 0; d < geom.n_detectors; ++d)
            out.values.at(a, d) = detail::measure_bin(ctx, stack, a, d);
    return out;
}

Sinogram ref::measure(const std::vector<GridF>& stack, const SourceSpectrum& spectrum,
                      const DetectorModel& detector, const NoiseConfig& noise, const ScanGeometry& geom) {
    validate_measure_input(stack, spectrum, detector, geom);
    detail::MeasureContext ctx(spectrum, detector, noise);

    Sinogram out;
    out.geom = geom;
    out.unit = SinoUnit::NormalizedMeasurement;
    out.values = GridF(geom.n_angles, geom.n_detectors);
    for (int a = 0; a < geom.n_angles; ++a)
        for (int d = 0; d < geom.n_detectors; ++d)
            out.values.at(a, d) = detail::measure_bin(ctx, stack, a, d);
    return out;
}

std::vector<double> beam_hardening_curve(const Material& material, const std::vector<double>& thickness_cm,
                                         const SourceSpectrum& spectrum, const DetectorModel& detector) {
    spectrum.validate();
    detector.validate();
    std::vector<double> out;
    out.reserve(thickness_cm.size());
    double denom = 0.0;
    for (size_t i = 0; i < spectrum.energies_kev.size(); ++i)
        denom += detector.gain(spectrum.energies_kev[i]) * spectrum.i0 * spectrum.weights[i];
    for (double t : thickness_cm) {
        double num = 0.0;
        for (size_t i = 0; i < spectrum.energies_kev.size(); ++i) {
            double mu = material.mu_at(spectrum.energies_kev[i]);
            num += detector.gain(spectrum.energies_kev[i]) * spectrum.i0 * spectrum.weights[i] *
                   std::exp(-mu * t);
        }
        out.push_back(-std::log(std::max(num, 1e-12 * denom) / denom));
    }
    return out;
}

std::string spectrum_to_json(const SourceSpectrum& s) {
    nlohmann::json j{{"energies_keV", s.energies_kev}, {"weights", s.weights}, {"I0", s.i0}};
    return j.dump(2) + "\n";
}

SourceSpectrum spectrum_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("spectrum: bad JSON: ") + e.what());
    }
    SourceSpectrum s;
    s.energies_kev = j.at("energies_keV").get<std::vector<double>>();
    s.weights = j.at("weights").get<std::vector<double>>();
    s.i0 = j.at("I0").get<double>();
    s.validate();
    return s;
}

std::string detector_to_json(const DetectorModel& d) {
    nlohmann::json j{{"gamma_pA_per_quanta_keV", d.gamma_pa_per_quanta_kev},
                     {"sigma_e_sq_pA2", d.sigma_e_sq_pa2}};
    return j.dump(2) + "\n";
}

DetectorModel detector_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("detector: bad JSON: ") + e.what());
    }
    DetectorModel d;
    d.gamma_pa_per_quanta_kev = j.at("gamma_pA_per_quanta_keV").get<double>();
    d.sigma_e_sq_pa2 = j.at("sigma_e_sq_pA2").get<double>();
    d.validate();
    return d;
}

}  // namespace ctmar
