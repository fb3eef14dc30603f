#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctmar/core.hpp"

namespace ctmar {

struct Material {
    int id = 0;
    std::string name;
    std::string formula;
    bool is_metal = false;
    // (energy keV, mu cm^-1) samples, strictly increasing energies,
    // linearly interpolated in between
    std::vector<std::pair<double, double>> curve;

    double mu_at(double energy_kev) const;
};

using MaterialTable = std::vector<Material>;

// Air + 10 non-metals + 8 metals with built-in synthetic attenuation curves
// mu(E) = c_photo * E^-3 + c_compton sampled at 1 keV steps over [10, 130].
// Constants are chosen so water hits 0.202527 cm^-1 at 65 keV, every curve is
// strictly decreasing, and every metal lies above every non-metal at all
// energies. Real measured curves can be dropped in via the JSON table format.
MaterialTable build_material_table();

const Material& material_by_id(const MaterialTable& table, int id);

// JSON import/export: array of {name, is_metal, curve: [[keV, mu], ...]}.
// Ids are assigned by array position; entry 0 must be the all-zero air curve.
std::string material_table_to_json(const MaterialTable& table);
MaterialTable material_table_from_json(const std::string& json_text);

enum class ShapeKind { Disk, Rectangle };

struct ScenePrimitive {
    ShapeKind shape = ShapeKind::Disk;
    double cx_mm = 0.0, cy_mm = 0.0;
    double radius_mm = 0.0;             // disk
    double half_a_mm = 0.0, half_b_mm = 0.0;  // rectangle half-extents
    double rotation_rad = 0.0;          // rectangle
    int material_id = 0;

    bool contains(double x_mm, double y_mm) const;
    // conservative bounding radius around the center
    double bound_radius() const;
};

struct SceneSpec {
    double fov_mm = 475.0;
    std::uint64_t seed = 0;
    std::vector<ScenePrimitive> primitives;  // later entries overwrite earlier
};

struct SceneConfig {
    int n_objects_min = 2;
    int n_objects_max = 6;
    double size_min_mm = 20.0;
    double size_max_mm = 90.0;
    double fov_mm = 475.0;
    int max_attempts = 1000;
};

struct MetalConfig {
    int max_metals = 5;
    double size_min_mm = 8.0;
    double size_max_mm = 30.0;
    bool disks_only = false;
    int max_attempts = 1000;
};

struct LabelImage {
    Grid<std::uint8_t> labels;  // material ids
    double pixel_pitch_mm = 0.0;
};

// Uniformly random non-metal primitives inside the FOV's inscribed circle.
// Deterministic for fixed (config, seed).
SceneSpec sample_scene(const SceneConfig& config, const MaterialTable& table, std::uint64_t seed);

// Appends up to n_metals metal primitives whose rasterized footprint (with a
// one-pixel safety border, checked at a fixed internal 256^2 grid) covers only
// air pixels of the input scene. Throws validation_error on placement failure.
SceneSpec insert_metals(const SceneSpec& scene, int n_metals, const MetalConfig& config,
                        const MaterialTable& table, std::uint64_t seed);

// Pixel gets the material of the last primitive containing its center.
LabelImage rasterize_labels(const SceneSpec& scene, int n_pixels);

// Per-pixel linear interpolation of each labeled material's curve.
GridF attenuation_at(const LabelImage& labels, double energy_kev, const MaterialTable& table);

GridB metal_mask_image(const LabelImage& labels, const MaterialTable& table);

// JSON scene file <-> SceneSpec
std::string scene_to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const std::string& json_text);

}  // namespace ctmar
