#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ctmar/analysis.hpp"
#include "ctmar/mar_classical.hpp"
#include "ctmar/physics.hpp"
#include "ctmar/recon.hpp"
#include "ctmar/scene.hpp"
#include "ctmar/train.hpp"

namespace ctmar {

// Desk-scale defaults with a paper-scale profile selectable by name; every
// field can be overridden from a JSON config file.
struct RunConfig {
    std::string profile = "desk";
    int grid = 128;  // phantom / reconstruction pixels
    ScanGeometry geometry{180, 128, 475.0, 0, 0};
    int n_energies = 13;
    double i0 = 1.7e5;
    DetectorModel detector;
    NoiseConfig noise{true, true, 0, 1e3};
    SceneConfig scene;
    MetalConfig metal;
    int mask_dilation_px = 2;
    double segment_threshold_mhu = 4000.0;
    int segment_erode_px = 2;
    int segment_dilate_px = 4;
    FbpConfig fbp_config;
    nn::GeneratorSpec gen_spec;
    nn::DiscriminatorSpec disc_spec;
    nn::TrainSchedule schedule;

    SourceSpectrum spectrum() const { return default_spectrum(n_energies, 10.0, 130.0, i0); }
    void validate() const;
};

RunConfig make_profile(const std::string& name);  // "desk" | "paper" | "toy"
RunConfig apply_config_json(RunConfig base, const std::string& json_text);

struct ManifestEntry {
    std::string scene_file;
    std::string reference_sinogram;
    std::string incomplete_sinogram;
    std::string sinogram_mask;
    std::string image_metal_mask;
    bool flip_flag = false;
};

struct DatasetManifest {
    int version = 1;
    std::uint64_t seed = 0;
    ScanGeometry geometry;
    std::string spectrum_file;
    std::string detector_file;
    std::vector<ManifestEntry> entries;
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& json_text);

// Training-pair generation: sample a metal-free scene, measure its reference
// sinogram, define metal placements, project their oracle mask, delete the
// trace, write every artifact; optionally append the detector-axis mirrored
// copy of each pair. Scene-parallel with per-scene seeds; byte-identical
// output for any thread count.
DatasetManifest gen_dataset(const std::string& out_dir, int n_scenes, int metals_per_scene_max, bool flips,
                            const RunConfig& cfg, std::uint64_t seed);

// Load manifest entries as network examples, zero-padded to dims divisible
// by 2^depth (or the geometry pad shape when set).
std::vector<nn::Example<float>> load_examples(const std::string& dataset_dir, const DatasetManifest& m,
                                              int depth, int* padded_h = nullptr, int* padded_w = nullptr);

enum class MarMethod { None, Li, Wnn, Learned };
MarMethod mar_method_from_name(const std::string& name);

struct MarResult {
    Sinogram completed;
    Image reconstruction;
    GridB image_metal_mask;   // detected or oracle
    SinogramMask sino_mask;
    Image uncorrected;
};

// Fig-2 style end-to-end pass: FBP -> metal segmentation (or oracle mask) ->
// mask projection -> deletion -> completion -> FBP -> metal reinsertion.
// Method None reconstructs the input as-is (the uncorrected baseline).
MarResult run_mar(const Sinogram& sino, MarMethod method, const RunConfig& cfg,
                  nn::Generator<float>* generator = nullptr, const GridB* oracle_image_mask = nullptr);

// pad/crop helper for the learned path: next multiple of 2^depth (or the
// geometry pad shape)
std::pair<int, int> learned_pad_shape(const ScanGeometry& geom, int rows, int cols, int depth);

}  // namespace ctmar
