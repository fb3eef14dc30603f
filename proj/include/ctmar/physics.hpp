#pragma once

#include <cstdint>
#include <vector>

#include "ctmar/projector.hpp"
#include "ctmar/scene.hpp"

namespace ctmar {

struct SourceSpectrum {
    std::vector<double> energies_kev;  // strictly increasing
    std::vector<double> weights;       // eta(E), >= 0, at least one positive
    double i0 = 1.7e5;                 // photons per ray

    void validate() const;
};

struct DetectorModel {
    double gamma_pa_per_quanta_kev = 2.6e-3;  // gain rule g(E) = gamma * E
    double sigma_e_sq_pa2 = 3.37;             // electronic-noise variance

    double gain(double energy_kev) const { return gamma_pa_per_quanta_kev * energy_kev; }
    void validate() const;
};

struct NoiseConfig {
    bool poisson = false;
    bool electronic = false;
    std::uint64_t seed = 0;
    double poisson_normal_threshold = 1e3;  // exact sampling at or below, normal approx above
};

// Bremsstrahlung-like built-in spectrum: eta(E) proportional to
// Emax*(Emax-E)/E on n uniform energies over [lo, hi], normalized to sum 1.
SourceSpectrum default_spectrum(int n_energies = 121, double lo_kev = 10.0, double hi_kev = 130.0,
                                double i0 = 1.7e5);

// Per-energy line integrals for one scene: stack[i] = forward projection of
// the attenuation map at spectrum energy i.
std::vector<GridF> line_integral_stack(const LabelImage& labels, const MaterialTable& table,
                                       const SourceSpectrum& spectrum, const ScanGeometry& geom);

// Mean detected intensity per energy and bin: I0 * eta_i * exp(-p).
std::vector<GridF> expected_intensities(const std::vector<GridF>& stack, const SourceSpectrum& spectrum,
                                        const DetectorModel& detector);

// Log-normalized poly-energetic measurement. With noise off the Poisson draw
// collapses to its mean and the electronic term to 0; the numerator is
// clamped at 1e-12 * denominator before the log.
Sinogram measure(const std::vector<GridF>& stack, const SourceSpectrum& spectrum,
                 const DetectorModel& detector, const NoiseConfig& noise, const ScanGeometry& geom);

// Noiseless measurement for a ray crossing thickness t (cm) of one material,
// sampled over the given thickness grid.
std::vector<double> beam_hardening_curve(const Material& material, const std::vector<double>& thickness_cm,
                                         const SourceSpectrum& spectrum, const DetectorModel& detector);

// Spectrum / detector JSON files.
std::string spectrum_to_json(const SourceSpectrum& s);
SourceSpectrum spectrum_from_json(const std::string& json_text);
std::string detector_to_json(const DetectorModel& d);
DetectorModel detector_from_json(const std::string& json_text);

namespace ref {
Sinogram measure(const std::vector<GridF>& stack, const SourceSpectrum& spectrum,
                 const DetectorModel& detector, const NoiseConfig& noise, const ScanGeometry& geom);
}

}  // namespace ctmar
