#include "ctmar/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ctmar/containers.hpp"
#include "json.hpp"

namespace ctmar {

void RunConfig::validate() const {
    geometry.validate();
    if (grid < 2) throw validation_error("config: grid must be >= 2");
    if (n_energies < 1) throw validation_error("config: n_energies must be >= 1");
    if (mask_dilation_px < 0) throw validation_error("config: mask dilation must be >= 0");
    gen_spec.validate();
    disc_spec.validate();
    schedule.validate();
}

RunConfig make_profile(const std::string& name) {
    RunConfig cfg;
    if (name == "desk") {
        cfg.schedule.epochs = 6;
    } else if (name == "paper") {
        cfg.profile = "paper";
        cfg.grid = 512;
        cfg.geometry = ScanGeometry{720, 1024, 475.0, 768, 1024};
        cfg.n_energies = 121;
        cfg.scene.size_min_mm = 20.0;
        cfg.scene.size_max_mm = 110.0;
        cfg.scene.n_objects_min = 3;
        cfg.scene.n_objects_max = 8;
        cfg.gen_spec.depth = 6;
        cfg.gen_spec.widths = {64, 128, 256, 512, 512, 512};
        cfg.disc_spec.widths = {64, 128, 256, 512};
        cfg.schedule.epochs = 25;
    } else if (name == "toy") {
        // small enough to train in minutes on one core; dims divisible by 8
        cfg.profile = "toy";
        cfg.grid = 64;
        cfg.geometry = ScanGeometry{64, 48, 475.0, 0, 0};
        cfg.n_energies = 13;
        cfg.noise.poisson = false;
        cfg.noise.electronic = false;
        cfg.scene.n_objects_min = 3;
        cfg.scene.n_objects_max = 7;
        cfg.scene.size_min_mm = 25.0;
        cfg.scene.size_max_mm = 95.0;
        cfg.metal.size_min_mm = 22.0;
        cfg.metal.size_max_mm = 45.0;
        cfg.gen_spec.widths = {8, 16, 32};
        cfg.disc_spec.widths = {8, 16, 32};
        cfg.schedule.epochs = 60;
    } else {
        throw validation_error("unknown profile '" + name + "' (desk | paper | toy)");
    }
    cfg.fbp_config.n_pixels = cfg.grid;  // reconstruction grid == phantom grid
    return cfg;
}

RunConfig apply_config_json(RunConfig base, const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("config: bad JSON: ") + e.what());
    }
    RunConfig c = base;
    if (j.contains("profile")) c = make_profile(j.at("profile").get<std::string>());
    auto geti = [&](const char* k, int& dst) {
        if (j.contains(k)) dst = j.at(k).get<int>();
    };
    auto getd = [&](const char* k, double& dst) {
        if (j.contains(k)) dst = j.at(k).get<double>();
    };
    geti("grid", c.grid);
    geti("n_angles", c.geometry.n_angles);
    geti("n_detectors", c.geometry.n_detectors);
    getd("fov_mm", c.geometry.fov_mm);
    geti("pad_rows", c.geometry.pad_rows);
    geti("pad_cols", c.geometry.pad_cols);
    geti("n_energies", c.n_energies);
    getd("i0", c.i0);
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        if (n.contains("poisson")) c.noise.poisson = n.at("poisson").get<bool>();
        if (n.contains("electronic")) c.noise.electronic = n.at("electronic").get<bool>();
        if (n.contains("poisson_normal_threshold"))
            c.noise.poisson_normal_threshold = n.at("poisson_normal_threshold").get<double>();
    }
    if (j.contains("detector")) {
        const auto& d = j.at("detector");
        if (d.contains("gamma_pA_per_quanta_keV"))
            c.detector.gamma_pa_per_quanta_kev = d.at("gamma_pA_per_quanta_keV").get<double>();
        if (d.contains("sigma_e_sq_pA2")) c.detector.sigma_e_sq_pa2 = d.at("sigma_e_sq_pA2").get<double>();
    }
    if (j.contains("scene")) {
        const auto& s = j.at("scene");
        if (s.contains("n_objects_min")) c.scene.n_objects_min = s.at("n_objects_min").get<int>();
        if (s.contains("n_objects_max")) c.scene.n_objects_max = s.at("n_objects_max").get<int>();
        if (s.contains("size_min_mm")) c.scene.size_min_mm = s.at("size_min_mm").get<double>();
        if (s.contains("size_max_mm")) c.scene.size_max_mm = s.at("size_max_mm").get<double>();
    }
    if (j.contains("metal")) {
        const auto& m = j.at("metal");
        if (m.contains("max_metals")) c.metal.max_metals = m.at("max_metals").get<int>();
        if (m.contains("size_min_mm")) c.metal.size_min_mm = m.at("size_min_mm").get<double>();
        if (m.contains("size_max_mm")) c.metal.size_max_mm = m.at("size_max_mm").get<double>();
    }
    geti("mask_dilation_px", c.mask_dilation_px);
    getd("segment_threshold_mhu", c.segment_threshold_mhu);
    geti("segment_erode_px", c.segment_erode_px);
    geti("segment_dilate_px", c.segment_dilate_px);
    if (j.contains("fbp_filter")) {
        std::string fn = j.at("fbp_filter").get<std::string>();
        if (fn == "ram-lak")
            c.fbp_config.filter = FbpFilter::RamLak;
        else if (fn == "hann")
            c.fbp_config.filter = FbpFilter::Hann;
        else
            throw validation_error("config: unknown fbp_filter '" + fn + "'");
    }
    if (j.contains("net")) {
        const auto& n = j.at("net");
        if (n.contains("depth")) c.gen_spec.depth = n.at("depth").get<int>();
        if (n.contains("widths")) c.gen_spec.widths = n.at("widths").get<std::vector<int>>();
        if (n.contains("leaky_slope")) c.gen_spec.leaky_slope = n.at("leaky_slope").get<double>();
        if (n.contains("dropout_p")) c.gen_spec.dropout_p = n.at("dropout_p").get<double>();
        if (n.contains("value_scale")) c.gen_spec.value_scale = n.at("value_scale").get<double>();
        if (n.contains("disc_widths")) c.disc_spec.widths = n.at("disc_widths").get<std::vector<int>>();
    }
    c.fbp_config.n_pixels = c.grid;
    if (j.contains("train")) {
        const auto& t = j.at("train");
        if (t.contains("epochs")) c.schedule.epochs = t.at("epochs").get<int>();
        if (t.contains("batch_size")) c.schedule.batch_size = t.at("batch_size").get<int>();
        if (t.contains("warmup_epochs")) c.schedule.warmup_epochs = t.at("warmup_epochs").get<int>();
        if (t.contains("lambda")) c.schedule.lambda = t.at("lambda").get<double>();
        if (t.contains("g_adv_variant"))
            c.schedule.g_adv_variant = t.at("g_adv_variant").get<std::string>() == "minimax_literal"
                                           ? nn::AdvVariant::MinimaxLiteral
                                           : nn::AdvVariant::NonSaturating;
    }
    c.validate();
    return c;
}

std::string manifest_to_json(const DatasetManifest& m) {
    nlohmann::json entries = nlohmann::json::array();
    for (const ManifestEntry& e : m.entries)
        entries.push_back({{"scene_file", e.scene_file},
                           {"reference_sinogram", e.reference_sinogram},
                           {"incomplete_sinogram", e.incomplete_sinogram},
                           {"sinogram_mask", e.sinogram_mask},
                           {"image_metal_mask", e.image_metal_mask},
                           {"flip_flag", e.flip_flag}});
    nlohmann::json j{{"version", m.version},
                     {"seed", m.seed},
                     {"geometry",
                      {{"n_angles", m.geometry.n_angles},
                       {"n_detectors", m.geometry.n_detectors},
                       {"fov_mm", m.geometry.fov_mm},
                       {"pad_rows", m.geometry.pad_rows},
                       {"pad_cols", m.geometry.pad_cols}}},
                     {"spectrum_file", m.spectrum_file},
                     {"detector_file", m.detector_file},
                     {"entries", entries}};
    return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("manifest: bad JSON: ") + e.what());
    }
    DatasetManifest m;
    m.version = j.at("version").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& g = j.at("geometry");
    m.geometry.n_angles = g.at("n_angles").get<int>();
    m.geometry.n_detectors = g.at("n_detectors").get<int>();
    m.geometry.fov_mm = g.at("fov_mm").get<double>();
    m.geometry.pad_rows = g.at("pad_rows").get<int>();
    m.geometry.pad_cols = g.at("pad_cols").get<int>();
    m.spectrum_file = j.at("spectrum_file").get<std::string>();
    m.detector_file = j.at("detector_file").get<std::string>();
    for (const auto& e : j.at("entries"))
        m.entries.push_back({e.at("scene_file").get<std::string>(),
                             e.at("reference_sinogram").get<std::string>(),
                             e.at("incomplete_sinogram").get<std::string>(),
                             e.at("sinogram_mask").get<std::string>(),
                             e.at("image_metal_mask").get<std::string>(), e.at("flip_flag").get<bool>()});
    return m;
}

namespace {

struct SceneProducts {
    SceneSpec scene;
    Sinogram reference;
    Sinogram incomplete;
    SinogramMask mask;
    GridB image_metal_mask;
    double pitch_mm = 0.0;
};

SceneProducts build_scene_products(int scene_index, int metals_max, const RunConfig& cfg,
                                   const MaterialTable& table, const SourceSpectrum& spectrum,
                                   std::uint64_t master_seed) {
    const std::uint64_t scene_seed = mix_seed(master_seed, static_cast<std::uint64_t>(scene_index));
    SceneProducts out;
    out.scene = sample_scene(cfg.scene, table, mix_seed(scene_seed, 1));

    LabelImage labels = rasterize_labels(out.scene, cfg.grid);
    out.pitch_mm = labels.pixel_pitch_mm;
    std::vector<GridF> stack = line_integral_stack(labels, table, spectrum, cfg.geometry);
    NoiseConfig noise = cfg.noise;
    noise.seed = mix_seed(scene_seed, 2);
    out.reference = measure(stack, spectrum, cfg.detector, noise, cfg.geometry);

    Rng metal_rng(mix_seed(scene_seed, 3));
    int n_metals = metals_max <= 1 ? metals_max
                                   : static_cast<int>(metal_rng.uniform_int(1, metals_max));
    SceneSpec with_metals = insert_metals(out.scene, n_metals, cfg.metal, table, mix_seed(scene_seed, 4));
    LabelImage metal_labels = rasterize_labels(with_metals, cfg.grid);
    out.image_metal_mask = metal_mask_image(metal_labels, table);
    out.mask = project_metal_mask(out.image_metal_mask, metal_labels.pixel_pitch_mm, cfg.geometry,
                                  cfg.mask_dilation_px);
    out.incomplete = apply_mask(out.reference, out.mask);
    return out;
}

std::string entry_name(const char* stem, int index, bool flip, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%05d%s.%s", stem, index, flip ? "_flip" : "", ext);
    return buf;
}

}  // namespace

DatasetManifest gen_dataset(const std::string& out_dir, int n_scenes, int metals_per_scene_max, bool flips,
                            const RunConfig& cfg, std::uint64_t seed) {
    if (n_scenes < 1) throw validation_error("gen_dataset: n_scenes must be >= 1");
    if (metals_per_scene_max < 1 || metals_per_scene_max > cfg.metal.max_metals)
        throw validation_error("gen_dataset: metals_per_scene_max out of range");
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    const MaterialTable table = build_material_table();
    const SourceSpectrum spectrum = cfg.spectrum();

    DatasetManifest manifest;
    manifest.seed = seed;
    manifest.geometry = cfg.geometry;
    manifest.spectrum_file = "spectrum.json";
    manifest.detector_file = "detector.json";
    write_text_file(out_dir + "/spectrum.json", spectrum_to_json(spectrum));
    write_text_file(out_dir + "/detector.json", detector_to_json(cfg.detector));

    // compute in chunks in parallel, write in index order
    const int chunk = 8;
    std::vector<SceneProducts> products(static_cast<size_t>(std::min(chunk, n_scenes)));
    for (int base = 0; base < n_scenes; base += chunk) {
        const int count = std::min(chunk, n_scenes - base);
        std::string gen_error;
#pragma omp parallel for schedule(dynamic, 1)
        for (int k = 0; k < count; ++k) {
            try {
                products[static_cast<size_t>(k)] =
                    build_scene_products(base + k, metals_per_scene_max, cfg, table, spectrum, seed);
            } catch (const std::exception& e) {
#pragma omp critical
                if (gen_error.empty())
                    gen_error = "scene " + std::to_string(base + k) + ": " + e.what();
            }
        }
        if (!gen_error.empty()) throw validation_error("gen_dataset: " + gen_error);

        for (int k = 0; k < count; ++k) {
            const int i = base + k;
            SceneProducts& p = products[static_cast<size_t>(k)];
            ManifestEntry e;
            e.scene_file = entry_name("scene", i, false, "json");
            e.reference_sinogram = entry_name("ref", i, false, "sino");
            e.incomplete_sinogram = entry_name("inc", i, false, "sino");
            e.sinogram_mask = entry_name("mask", i, false, "mask");
            e.image_metal_mask = entry_name("imgmask", i, false, "mask");
            write_text_file(out_dir + "/" + e.scene_file, scene_to_json(p.scene));
            write_sinogram(out_dir + "/" + e.reference_sinogram, p.reference);
            write_sinogram(out_dir + "/" + e.incomplete_sinogram, p.incomplete);
            write_mask(out_dir + "/" + e.sinogram_mask, p.mask, cfg.geometry);
            write_image_mask(out_dir + "/" + e.image_metal_mask, p.image_metal_mask, p.pitch_mm);
            manifest.entries.push_back(e);

            if (flips) {
                ManifestEntry fe;
                fe.scene_file = e.scene_file;  // same scene, detector axis mirrored
                fe.reference_sinogram = entry_name("ref", i, true, "sino");
                fe.incomplete_sinogram = entry_name("inc", i, true, "sino");
                fe.sinogram_mask = entry_name("mask", i, true, "mask");
                fe.image_metal_mask = entry_name("imgmask", i, true, "mask");
                fe.flip_flag = true;
                write_sinogram(out_dir + "/" + fe.reference_sinogram, flip_detector_axis(p.reference));
                write_sinogram(out_dir + "/" + fe.incomplete_sinogram, flip_detector_axis(p.incomplete));
                write_mask(out_dir + "/" + fe.sinogram_mask, flip_detector_axis(p.mask), cfg.geometry);
                GridB flipped_img(p.image_metal_mask.rows, p.image_metal_mask.cols);
                for (int r = 0; r < flipped_img.rows; ++r)
                    for (int c = 0; c < flipped_img.cols; ++c)
                        flipped_img.at(r, c) = p.image_metal_mask.at(r, flipped_img.cols - 1 - c);
                write_image_mask(out_dir + "/" + fe.image_metal_mask, flipped_img, p.pitch_mm);
                manifest.entries.push_back(fe);
            }
        }
    }
    write_text_file(out_dir + "/manifest.json", manifest_to_json(manifest));
    return manifest;
}

std::pair<int, int> learned_pad_shape(const ScanGeometry& geom, int rows, int cols, int depth) {
    const int div = 1 << depth;
    auto round_up = [div](int v) { return (v + div - 1) / div * div; };
    int pr = geom.pad_rows > 0 ? geom.pad_rows : round_up(rows);
    int pc = geom.pad_cols > 0 ? geom.pad_cols : round_up(cols);
    if (pr % div != 0 || pc % div != 0)
        throw validation_error("pad shape not divisible by 2^depth");
    if (pr < rows || pc < cols) throw validation_error("pad shape smaller than sinogram");
    return {pr, pc};
}

std::vector<nn::Example<float>> load_examples(const std::string& dataset_dir, const DatasetManifest& m,
                                              int depth, int* padded_h, int* padded_w) {
    auto [ph, pw] = learned_pad_shape(m.geometry, m.geometry.n_angles, m.geometry.n_detectors, depth);
    if (padded_h) *padded_h = ph;
    if (padded_w) *padded_w = pw;
    std::vector<nn::Example<float>> out;
    out.reserve(m.entries.size());
    for (const ManifestEntry& e : m.entries) {
        Sinogram ref = read_sinogram(dataset_dir + "/" + e.reference_sinogram, &m.geometry);
        Sinogram inc = read_sinogram(dataset_dir + "/" + e.incomplete_sinogram, &m.geometry);
        SinogramMask mask = read_mask(dataset_dir + "/" + e.sinogram_mask, &m.geometry);
        GridF refp = pad_grid(ref.values, ph, pw);
        GridF incp = pad_grid(inc.values, ph, pw);
        GridB maskp = pad_grid(mask.values, ph, pw);
        nn::Example<float> ex;
        ex.x = nn::Tensor4<float>(1, 1, ph, pw);
        ex.y = nn::Tensor4<float>(1, 1, ph, pw);
        ex.mask = nn::Tensor4<float>(1, 1, ph, pw);
        for (size_t i = 0; i < refp.v.size(); ++i) {
            ex.x.v[i] = incp.v[i];
            ex.y.v[i] = refp.v[i];
            ex.mask.v[i] = maskp.v[i] ? 1.0f : 0.0f;
        }
        out.push_back(std::move(ex));
    }
    return out;
}

MarMethod mar_method_from_name(const std::string& name) {
    if (name == "none") return MarMethod::None;
    if (name == "li") return MarMethod::Li;
    if (name == "wnn") return MarMethod::Wnn;
    if (name == "learned") return MarMethod::Learned;
    throw validation_error("unknown MAR method '" + name + "' (none | li | wnn | learned)");
}

MarResult run_mar(const Sinogram& sino, MarMethod method, const RunConfig& cfg,
                  nn::Generator<float>* generator, const GridB* oracle_image_mask) {
    MarResult res;
    res.uncorrected = fbp(sino, cfg.fbp_config);
    res.uncorrected.provenance = "uncorrected";

    if (method == MarMethod::None) {
        res.completed = sino;
        res.reconstruction = res.uncorrected;
        res.image_metal_mask = GridB(res.uncorrected.values.rows, res.uncorrected.values.cols, 0);
        res.sino_mask.values = GridB(sino.values.rows, sino.values.cols, 0);
        return res;
    }

    if (oracle_image_mask) {
        if (oracle_image_mask->rows != res.uncorrected.values.rows ||
            oracle_image_mask->cols != res.uncorrected.values.cols)
            throw validation_error("run_mar: oracle mask shape does not match the reconstruction grid");
        res.image_metal_mask = *oracle_image_mask;
    } else {
        res.image_metal_mask = segment_metal(res.uncorrected, cfg.segment_threshold_mhu,
                                             cfg.segment_erode_px, cfg.segment_dilate_px);
    }

    bool any_metal = false;
    for (auto v : res.image_metal_mask.v)
        if (v) {
            any_metal = true;
            break;
        }
    if (!any_metal) {
        // nothing to delete: completion is a no-op and the reconstruction is
        // the uncorrected FBP exactly
        res.completed = sino;
        res.reconstruction = res.uncorrected;
        res.sino_mask.values = GridB(sino.values.rows, sino.values.cols, 0);
        return res;
    }

    res.sino_mask = project_metal_mask(res.image_metal_mask, res.uncorrected.pixel_pitch_mm, cfg.geometry,
                                       cfg.mask_dilation_px);
    Sinogram incomplete = apply_mask(sino, res.sino_mask);

    switch (method) {
        case MarMethod::Li:
            res.completed = li_mar(incomplete, res.sino_mask);
            res.completed.unit = sino.unit;
            res.reconstruction = fbp(res.completed, cfg.fbp_config);
            res.reconstruction.provenance = "li";
            break;
        case MarMethod::Wnn:
            res.completed = wnn_mar(incomplete, res.sino_mask);
            res.completed.unit = sino.unit;
            res.reconstruction = fbp(res.completed, cfg.fbp_config);
            res.reconstruction.provenance = "wnn";
            break;
        case MarMethod::Learned: {
            if (!generator) throw validation_error("run_mar: learned method needs a checkpoint");
            auto [ph, pw] = learned_pad_shape(cfg.geometry, sino.values.rows, sino.values.cols,
                                              generator->spec.depth);
            Sinogram padded = pad_sinogram(incomplete, ph, pw);
            SinogramMask padded_mask = pad_mask(res.sino_mask, ph, pw);
            Sinogram done = nn::infer(padded, padded_mask, *generator);
            res.completed = crop_sinogram(done, sino.values.rows, sino.values.cols);
            res.completed.geom = sino.geom;
            res.completed.unit = sino.unit;
            res.reconstruction = fbp(res.completed, cfg.fbp_config);
            res.reconstruction.provenance = "learned";
            break;
        }
        default:
            throw validation_error("run_mar: unhandled method");
    }
    res.reconstruction = reinsert_metal(res.reconstruction, res.image_metal_mask, res.uncorrected);
    res.reconstruction.provenance = method == MarMethod::Li    ? "li"
                                    : method == MarMethod::Wnn ? "wnn"
                                                               : "learned";
    return res;
}

}  // namespace ctmar
