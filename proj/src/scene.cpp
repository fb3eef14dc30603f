#include "ctmar/scene.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace ctmar {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Internal grid used for the metal background-overlap check, independent of
// whatever resolution callers rasterize at.
constexpr int kPlacementGrid = 256;

struct CurveSpec {
    const char* name;
    const char* formula;
    bool is_metal;
    double mu65;        // cm^-1 at 65 keV
    double photo_frac;  // fraction of mu65 carried by the E^-3 term
};

// Synthetic stand-ins for measured attenuation data: a photoelectric E^-3
// term plus a Compton plateau. Values at 65 keV keep the material ordering
// plausible (water pinned to 0.202527 cm^-1) and every metal above every
// non-metal across the whole band.
const CurveSpec kCurves[] = {
    {"Water", "H2O", false, 0.202527, 0.30},
    {"Rubber", "C5H8", false, 0.205, 0.30},
    {"Silicon", "Si", false, 0.42, 0.30},
    {"Graphite", "C", false, 0.285, 0.30},
    {"Teflon", "C2F4", false, 0.36, 0.30},
    {"Delrin", "CH2O", false, 0.26, 0.30},
    {"Plastic", "C2H4", false, 0.185, 0.30},
    {"Acrylic", "C5O2H8", false, 0.24, 0.30},
    {"PVC", "C2H3Cl", false, 0.31, 0.30},
    {"Neoprene", "C4H5Cl", false, 0.255, 0.30},
    {"Silver", "Ag", true, 12.0, 0.60},
    {"Copper", "Cu", true, 6.3, 0.60},
    {"Tungsten", "W", true, 32.0, 0.60},
    {"Iron", "Fe", true, 4.6, 0.60},
    {"Lead", "Pb", true, 28.0, 0.60},
    {"Tin", "Sn", true, 11.0, 0.60},
    {"Mercury", "Hg", true, 29.0, 0.60},
    {"Zinc", "Zn", true, 5.0, 0.60},
};

std::vector<std::pair<double, double>> synth_curve(double mu65, double photo_frac) {
    const double c_photo = photo_frac * mu65 * 65.0 * 65.0 * 65.0;
    const double c_compton = (1.0 - photo_frac) * mu65;
    std::vector<std::pair<double, double>> curve;
    curve.reserve(121);
    for (int e = 10; e <= 130; ++e) {
        double ed = static_cast<double>(e);
        curve.emplace_back(ed, c_photo / (ed * ed * ed) + c_compton);
    }
    return curve;
}

void validate_curve(const Material& m) {
    if (m.curve.size() < 2) throw validation_error("material '" + m.name + "': curve needs >= 2 samples");
    for (size_t i = 0; i < m.curve.size(); ++i) {
        if (m.curve[i].second < 0.0)
            throw validation_error("material '" + m.name + "': negative attenuation");
        if (i > 0 && m.curve[i].first <= m.curve[i - 1].first)
            throw validation_error("material '" + m.name + "': energies not strictly increasing");
    }
}

}  // namespace

double Material::mu_at(double energy_kev) const {
    if (curve.empty()) return 0.0;  // air
    if (energy_kev < curve.front().first || energy_kev > curve.back().first)
        throw validation_error("energy " + std::to_string(energy_kev) + " keV outside curve range of '" +
                               name + "'");
    auto it = std::upper_bound(curve.begin(), curve.end(), energy_kev,
                               [](double e, const std::pair<double, double>& s) { return e < s.first; });
    if (it == curve.begin()) return curve.front().second;
    if (it == curve.end()) return curve.back().second;
    auto lo = *(it - 1);
    auto hi = *it;
    double t = (energy_kev - lo.first) / (hi.first - lo.first);
    return lo.second + t * (hi.second - lo.second);
}

MaterialTable build_material_table() {
    MaterialTable table;
    Material air;
    air.id = 0;
    air.name = "Air";
    air.formula = "";
    air.is_metal = false;
    // empty curve == mu identically 0
    table.push_back(air);
    int id = 1;
    for (const CurveSpec& c : kCurves) {
        Material m;
        m.id = id++;
        m.name = c.name;
        m.formula = c.formula;
        m.is_metal = c.is_metal;
        m.curve = synth_curve(c.mu65, c.photo_frac);
        table.push_back(std::move(m));
    }
    return table;
}

const Material& material_by_id(const MaterialTable& table, int id) {
    if (id < 0 || id >= static_cast<int>(table.size()))
        throw validation_error("unknown material id " + std::to_string(id));
    return table[static_cast<size_t>(id)];
}

std::string material_table_to_json(const MaterialTable& table) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Material& m : table) {
        nlohmann::json cur = nlohmann::json::array();
        for (auto& [e, mu] : m.curve) cur.push_back({e, mu});
        arr.push_back({{"name", m.name}, {"is_metal", m.is_metal}, {"curve", cur}});
    }
    return arr.dump(2) + "\n";
}

MaterialTable material_table_from_json(const std::string& json_text) {
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("material table: bad JSON: ") + e.what());
    }
    if (!arr.is_array() || arr.empty()) throw validation_error("material table: expected non-empty array");
    MaterialTable table;
    int id = 0;
    for (const auto& j : arr) {
        Material m;
        m.id = id++;
        m.name = j.at("name").get<std::string>();
        m.is_metal = j.at("is_metal").get<bool>();
        for (const auto& s : j.at("curve")) m.curve.emplace_back(s.at(0).get<double>(), s.at(1).get<double>());
        if (!m.curve.empty()) validate_curve(m);
        table.push_back(std::move(m));
    }
    const Material& air = table[0];
    bool air_zero = air.curve.empty() ||
                    std::all_of(air.curve.begin(), air.curve.end(), [](auto& s) { return s.second == 0.0; });
    if (air.is_metal || !air_zero) throw validation_error("material table: entry 0 must be zero-mu air");
    return table;
}

bool ScenePrimitive::contains(double x_mm, double y_mm) const {
    double dx = x_mm - cx_mm;
    double dy = y_mm - cy_mm;
    if (shape == ShapeKind::Disk) return dx * dx + dy * dy <= radius_mm * radius_mm;
    double c = std::cos(rotation_rad), s = std::sin(rotation_rad);
    double u = c * dx + s * dy;
    double w = -s * dx + c * dy;
    return std::abs(u) <= half_a_mm && std::abs(w) <= half_b_mm;
}

double ScenePrimitive::bound_radius() const {
    if (shape == ShapeKind::Disk) return radius_mm;
    return std::hypot(half_a_mm, half_b_mm);
}

namespace {

// Everything stays inside the FOV's inscribed circle so parallel-beam
// projections never clip scene content at oblique angles.
bool fits_fov(const ScenePrimitive& p, double fov_mm) {
    return std::hypot(p.cx_mm, p.cy_mm) + p.bound_radius() <= 0.5 * fov_mm;
}

ScenePrimitive draw_primitive(Rng& rng, double fov_mm, double size_min, double size_max,
                              const std::vector<int>& material_ids) {
    ScenePrimitive p;
    p.shape = rng.uniform_int(0, 1) == 0 ? ShapeKind::Disk : ShapeKind::Rectangle;
    p.cx_mm = rng.uniform(-0.5 * fov_mm, 0.5 * fov_mm);
    p.cy_mm = rng.uniform(-0.5 * fov_mm, 0.5 * fov_mm);
    if (p.shape == ShapeKind::Disk) {
        p.radius_mm = rng.uniform(size_min, size_max);
    } else {
        p.half_a_mm = rng.uniform(size_min, size_max);
        p.half_b_mm = rng.uniform(size_min, size_max);
        p.rotation_rad = rng.uniform(0.0, kPi);
    }
    p.material_id = material_ids[static_cast<size_t>(rng.uniform_int(0, static_cast<std::int64_t>(material_ids.size()) - 1))];
    return p;
}

}  // namespace

SceneSpec sample_scene(const SceneConfig& config, const MaterialTable& table, std::uint64_t seed) {
    if (config.fov_mm <= 0.0) throw validation_error("sample_scene: fov must be positive");
    if (config.n_objects_min < 0 || config.n_objects_max < config.n_objects_min)
        throw validation_error("sample_scene: bad object-count range");
    if (config.size_min_mm <= 0.0 || config.size_max_mm < config.size_min_mm)
        throw validation_error("sample_scene: bad size range");

    std::vector<int> nonmetal_ids;
    for (const Material& m : table)
        if (m.id != 0 && !m.is_metal) nonmetal_ids.push_back(m.id);
    if (nonmetal_ids.empty()) throw validation_error("sample_scene: no non-metal materials in table");

    Rng rng(mix_seed(seed, 0x5ce7eULL));
    SceneSpec scene;
    scene.fov_mm = config.fov_mm;
    scene.seed = seed;
    int n = static_cast<int>(rng.uniform_int(config.n_objects_min, config.n_objects_max));
    for (int i = 0; i < n; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
            ScenePrimitive p = draw_primitive(rng, config.fov_mm, config.size_min_mm, config.size_max_mm,
                                              nonmetal_ids);
            if (fits_fov(p, config.fov_mm)) {
                scene.primitives.push_back(p);
                placed = true;
                break;
            }
        }
        if (!placed)
            throw validation_error("sample_scene: placement-failure for object " + std::to_string(i));
    }
    return scene;
}

SceneSpec insert_metals(const SceneSpec& scene, int n_metals, const MetalConfig& config,
                        const MaterialTable& table, std::uint64_t seed) {
    if (n_metals < 0 || n_metals > config.max_metals)
        throw validation_error("insert_metals: n_metals out of range 0.." + std::to_string(config.max_metals));
    if (n_metals == 0) return scene;

    std::vector<int> metal_ids;
    for (const Material& m : table)
        if (m.is_metal) metal_ids.push_back(m.id);
    if (metal_ids.empty()) throw validation_error("insert_metals: no metal materials in table");

    LabelImage base = rasterize_labels(scene, kPlacementGrid);
    const double pitch = base.pixel_pitch_mm;
    const int n = kPlacementGrid;

    auto pixel_center = [&](int idx) { return (idx + 0.5 - 0.5 * n) * pitch; };

    Rng rng(mix_seed(seed, 0x3e7a1ULL));
    SceneSpec out = scene;
    for (int i = 0; i < n_metals; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
            ScenePrimitive p = draw_primitive(rng, scene.fov_mm, config.size_min_mm, config.size_max_mm,
                                              metal_ids);
            if (config.disks_only && p.shape != ShapeKind::Disk) continue;
            if (!fits_fov(p, scene.fov_mm)) continue;
            // footprint plus a one-pixel border must be all air in the base scene
            double r = p.bound_radius() + pitch;
            int r0 = std::max(0, static_cast<int>(std::floor((p.cy_mm - r) / pitch + 0.5 * n)));
            int r1 = std::min(n - 1, static_cast<int>(std::ceil((p.cy_mm + r) / pitch + 0.5 * n)));
            int c0 = std::max(0, static_cast<int>(std::floor((p.cx_mm - r) / pitch + 0.5 * n)));
            int c1 = std::min(n - 1, static_cast<int>(std::ceil((p.cx_mm + r) / pitch + 0.5 * n)));
            bool clear = true;
            for (int rr = r0; rr <= r1 && clear; ++rr) {
                double y = pixel_center(rr);
                for (int cc = c0; cc <= c1; ++cc) {
                    if (base.labels.at(rr, cc) == 0) continue;
                    double x = pixel_center(cc);
                    // occupied pixel: reject if inside the footprint or within
                    // one pixel of it (checked on the 3x3 neighborhood)
                    bool near = false;
                    for (int dy = -1; dy <= 1 && !near; ++dy)
                        for (int dx = -1; dx <= 1; ++dx)
                            if (p.contains(x + dx * pitch, y + dy * pitch)) {
                                near = true;
                                break;
                            }
                    if (near) {
                        clear = false;
                        break;
                    }
                }
            }
            if (clear) {
                out.primitives.push_back(p);
                placed = true;
                break;
            }
        }
        if (!placed)
            throw validation_error("insert_metals: placement-failure for metal " + std::to_string(i));
    }
    return out;
}

LabelImage rasterize_labels(const SceneSpec& scene, int n_pixels) {
    if (n_pixels < 2) throw validation_error("rasterize_labels: n_pixels must be >= 2");
    LabelImage img;
    img.pixel_pitch_mm = scene.fov_mm / n_pixels;
    img.labels = Grid<std::uint8_t>(n_pixels, n_pixels, 0);
    const double pitch = img.pixel_pitch_mm;
    const int n = n_pixels;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < n; ++r) {
        double y = (r + 0.5 - 0.5 * n) * pitch;
        for (int c = 0; c < n; ++c) {
            double x = (c + 0.5 - 0.5 * n) * pitch;
            std::uint8_t label = 0;
            for (const ScenePrimitive& p : scene.primitives)
                if (p.contains(x, y)) label = static_cast<std::uint8_t>(p.material_id);
            img.labels.at(r, c) = label;
        }
    }
    return img;
}

GridF attenuation_at(const LabelImage& labels, double energy_kev, const MaterialTable& table) {
    // one curve lookup per material, then a table map over pixels
    std::vector<float> mu_of_id(table.size());
    for (size_t i = 0; i < table.size(); ++i) mu_of_id[i] = static_cast<float>(table[i].mu_at(energy_kev));

    GridF out(labels.labels.rows, labels.labels.cols);
    const auto& lab = labels.labels;
#pragma omp parallel for schedule(static)
    for (int r = 0; r < lab.rows; ++r) {
        for (int c = 0; c < lab.cols; ++c) {
            std::uint8_t id = lab.at(r, c);
            if (id >= table.size()) {
                // deferred: thrown below, exceptions cannot leave the omp region
                out.at(r, c) = -1.0f;
                continue;
            }
            out.at(r, c) = mu_of_id[id];
        }
    }
    for (float f : out.v)
        if (f < 0.0f) throw validation_error("attenuation_at: unknown material label in image");
    return out;
}

GridB metal_mask_image(const LabelImage& labels, const MaterialTable& table) {
    GridB out(labels.labels.rows, labels.labels.cols, 0);
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) {
            std::uint8_t id = labels.labels.at(r, c);
            out.at(r, c) = material_by_id(table, id).is_metal ? 1 : 0;
        }
    return out;
}

std::string scene_to_json(const SceneSpec& scene) {
    nlohmann::json prims = nlohmann::json::array();
    for (const ScenePrimitive& p : scene.primitives) {
        nlohmann::json j;
        j["center"] = {p.cx_mm, p.cy_mm};
        j["material_id"] = p.material_id;
        if (p.shape == ShapeKind::Disk) {
            j["shape"] = "disk";
            j["radius"] = p.radius_mm;
        } else {
            j["shape"] = "rectangle";
            j["half_extents"] = {p.half_a_mm, p.half_b_mm};
            j["rotation"] = p.rotation_rad;
        }
        prims.push_back(j);
    }
    nlohmann::json j{{"fov_mm", scene.fov_mm}, {"seed", scene.seed}, {"primitives", prims}};
    return j.dump(2) + "\n";
}

SceneSpec scene_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("scene: bad JSON: ") + e.what());
    }
    SceneSpec scene;
    scene.fov_mm = j.at("fov_mm").get<double>();
    scene.seed = j.value("seed", std::uint64_t{0});
    if (scene.fov_mm <= 0.0) throw validation_error("scene: fov must be positive");
    for (const auto& jp : j.at("primitives")) {
        ScenePrimitive p;
        p.cx_mm = jp.at("center").at(0).get<double>();
        p.cy_mm = jp.at("center").at(1).get<double>();
        p.material_id = jp.at("material_id").get<int>();
        std::string shape = jp.at("shape").get<std::string>();
        if (shape == "disk") {
            p.shape = ShapeKind::Disk;
            p.radius_mm = jp.at("radius").get<double>();
            if (p.radius_mm <= 0.0) throw validation_error("scene: disk radius must be positive");
        } else if (shape == "rectangle") {
            p.shape = ShapeKind::Rectangle;
            p.half_a_mm = jp.at("half_extents").at(0).get<double>();
            p.half_b_mm = jp.at("half_extents").at(1).get<double>();
            p.rotation_rad = jp.at("rotation").get<double>();
            if (p.half_a_mm <= 0.0 || p.half_b_mm <= 0.0)
                throw validation_error("scene: rectangle half-extents must be positive");
        } else {
            throw validation_error("scene: unknown shape '" + shape + "'");
        }
        scene.primitives.push_back(p);
    }
    return scene;
}

}  // namespace ctmar
