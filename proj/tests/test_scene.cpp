#include <cmath>

#include "ctmar/scene.hpp"
#include "doctest.h"

using namespace ctmar;

TEST_CASE("material table holds air plus 10 non-metals and 8 metals") {
    MaterialTable t = build_material_table();
    CHECK(t.size() == 19);
    CHECK(t[0].name == "Air");
    CHECK_FALSE(t[0].is_metal);
    int metals = 0, nonmetals = 0;
    for (size_t i = 1; i < t.size(); ++i) (t[i].is_metal ? metals : nonmetals)++;
    CHECK(metals == 8);
    CHECK(nonmetals == 10);
}

TEST_CASE("air attenuation is zero everywhere") {
    MaterialTable t = build_material_table();
    for (double e : {10.0, 37.5, 65.0, 130.0}) CHECK(t[0].mu_at(e) == 0.0);
}

TEST_CASE("every metal exceeds every non-metal at 65 keV and across the band") {
    MaterialTable t = build_material_table();
    for (double e : {10.0, 33.0, 65.0, 99.5, 130.0}) {
        double max_nonmetal = 0.0, min_metal = 1e30;
        for (size_t i = 1; i < t.size(); ++i) {
            double mu = t[i].mu_at(e);
            if (t[i].is_metal)
                min_metal = std::min(min_metal, mu);
            else
                max_nonmetal = std::max(max_nonmetal, mu);
        }
        CHECK(min_metal > max_nonmetal);
    }
}

TEST_CASE("water pinned near 0.202527 at 65 keV; curves strictly decreasing") {
    MaterialTable t = build_material_table();
    const Material* water = nullptr;
    for (const Material& m : t)
        if (m.name == "Water") water = &m;
    REQUIRE(water != nullptr);
    CHECK(water->mu_at(65.0) == doctest::Approx(0.202527).epsilon(1e-9));
    for (size_t i = 1; i < t.size(); ++i)
        for (size_t k = 1; k < t[i].curve.size(); ++k)
            CHECK(t[i].curve[k].second < t[i].curve[k - 1].second);
}

TEST_CASE("material table JSON round-trip") {
    MaterialTable t = build_material_table();
    MaterialTable back = material_table_from_json(material_table_to_json(t));
    REQUIRE(back.size() == t.size());
    for (size_t i = 0; i < t.size(); ++i) {
        CHECK(back[i].name == t[i].name);
        CHECK(back[i].is_metal == t[i].is_metal);
        CHECK(back[i].curve == t[i].curve);
    }
    CHECK_THROWS_AS(material_table_from_json("[{\"name\":\"x\"}]"), std::exception);
}

TEST_CASE("attenuation interpolation: endpoint exact, midpoint is the mean") {
    Material m;
    m.id = 1;
    m.name = "test";
    m.curve = {{10.0, 4.0}, {20.0, 2.0}, {30.0, 1.0}};
    CHECK(m.mu_at(20.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(m.mu_at(15.0) == doctest::Approx(3.0).epsilon(1e-12));  // (4+2)/2
    CHECK(m.mu_at(25.0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK_THROWS_AS(m.mu_at(9.0), validation_error);
}

TEST_CASE("sample_scene: zero objects, determinism, non-metal only") {
    MaterialTable t = build_material_table();
    SceneConfig cfg;
    cfg.n_objects_min = 0;
    cfg.n_objects_max = 0;
    SceneSpec empty = sample_scene(cfg, t, 7);
    CHECK(empty.primitives.empty());

    cfg.n_objects_min = 1;
    cfg.n_objects_max = 5;
    SceneSpec a = sample_scene(cfg, t, 42);
    SceneSpec b = sample_scene(cfg, t, 42);
    REQUIRE(a.primitives.size() == b.primitives.size());
    for (size_t i = 0; i < a.primitives.size(); ++i) {
        CHECK(a.primitives[i].cx_mm == b.primitives[i].cx_mm);
        CHECK(a.primitives[i].material_id == b.primitives[i].material_id);
        CHECK_FALSE(material_by_id(t, a.primitives[i].material_id).is_metal);
    }
}

TEST_CASE("sample_scene: all primitives fit inside the FOV") {
    MaterialTable t = build_material_table();
    SceneConfig cfg;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        SceneSpec s = sample_scene(cfg, t, seed);
        for (const ScenePrimitive& p : s.primitives)
            CHECK(std::hypot(p.cx_mm, p.cy_mm) + p.bound_radius() <= 0.5 * cfg.fov_mm + 1e-9);
    }
}

TEST_CASE("sample_scene: object count uniform over 1..5 within 3-sigma") {
    MaterialTable t = build_material_table();
    SceneConfig cfg;
    cfg.n_objects_min = 1;
    cfg.n_objects_max = 5;
    const int n = 10000;
    int hist[6] = {0, 0, 0, 0, 0, 0};
    for (int i = 0; i < n; ++i)
        hist[sample_scene(cfg, t, static_cast<std::uint64_t>(i)).primitives.size()]++;
    const double p = 0.2, mean = n * p, sigma = std::sqrt(n * p * (1 - p));
    for (int k = 1; k <= 5; ++k) CHECK(std::abs(hist[k] - mean) <= 3.0 * sigma);
}

TEST_CASE("rasterize_labels: empty scene, disk area, ordering rule") {
    SceneSpec scene;
    scene.fov_mm = 128.0;
    LabelImage img = rasterize_labels(scene, 64);
    for (auto v : img.labels.v) CHECK(v == 0);

    ScenePrimitive disk;
    disk.shape = ShapeKind::Disk;
    disk.radius_mm = 30.0;
    disk.material_id = 1;
    scene.primitives.push_back(disk);
    const int n = 128;
    img = rasterize_labels(scene, n);
    // brute-force pixel-center membership oracle
    int count = 0, oracle = 0, perimeter = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double x = (j + 0.5 - 0.5 * n) * img.pixel_pitch_mm;
            double y = (i + 0.5 - 0.5 * n) * img.pixel_pitch_mm;
            double d = std::hypot(x, y);
            if (img.labels.at(i, j) == 1) ++count;
            if (d <= disk.radius_mm) ++oracle;
            if (std::abs(d - disk.radius_mm) <= img.pixel_pitch_mm) ++perimeter;
        }
    CHECK(count == oracle);
    double analytic = 3.14159265358979 * disk.radius_mm * disk.radius_mm /
                      (img.pixel_pitch_mm * img.pixel_pitch_mm);
    CHECK(std::abs(count - analytic) <= perimeter);

    // second disk covering the overlap wins
    ScenePrimitive disk2 = disk;
    disk2.cx_mm = 20.0;
    disk2.material_id = 2;
    scene.primitives.push_back(disk2);
    img = rasterize_labels(scene, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double x = (j + 0.5 - 0.5 * n) * img.pixel_pitch_mm;
            double y = (i + 0.5 - 0.5 * n) * img.pixel_pitch_mm;
            if (disk2.contains(x, y))
                CHECK(img.labels.at(i, j) == 2);
            else if (disk.contains(x, y))
                CHECK(img.labels.at(i, j) == 1);
        }
}

TEST_CASE("rasterization refinement: area estimate stays within a perimeter band") {
    SceneSpec scene;
    scene.fov_mm = 100.0;
    ScenePrimitive disk;
    disk.shape = ShapeKind::Disk;
    disk.cx_mm = 8.0;
    disk.cy_mm = -11.0;
    disk.radius_mm = 23.0;
    disk.material_id = 3;
    scene.primitives.push_back(disk);
    for (int n : {64, 128, 256}) {
        LabelImage img = rasterize_labels(scene, n);
        int count = 0;
        for (auto v : img.labels.v)
            if (v == 3) ++count;
        double pitch = scene.fov_mm / n;
        double area_est = count * pitch * pitch;
        double analytic = 3.14159265358979 * disk.radius_mm * disk.radius_mm;
        double band = 2.0 * 3.14159265358979 * disk.radius_mm * pitch;  // one perimeter-pixel band
        CHECK(std::abs(area_est - analytic) <= band);
    }
}

TEST_CASE("insert_metals: n=0 identity, metals only on air, count appended") {
    MaterialTable t = build_material_table();
    SceneConfig cfg;
    MetalConfig mc;
    SceneSpec scene = sample_scene(cfg, t, 5);
    SceneSpec same = insert_metals(scene, 0, mc, t, 9);
    CHECK(same.primitives.size() == scene.primitives.size());

    SceneSpec with5 = insert_metals(scene, 5, mc, t, 9);
    CHECK(with5.primitives.size() == scene.primitives.size() + 5);
    for (size_t i = scene.primitives.size(); i < with5.primitives.size(); ++i)
        CHECK(material_by_id(t, with5.primitives[i].material_id).is_metal);
    for (size_t i = 0; i < scene.primitives.size(); ++i)
        CHECK(with5.primitives[i].material_id == scene.primitives[i].material_id);

    // exhaustive pixel check at 128^2 and at/above the placement resolution
    for (int n : {128, 256, 512}) {
        LabelImage base = rasterize_labels(scene, n);
        LabelImage out = rasterize_labels(with5, n);
        int bad = 0, changed = 0;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                bool metal = material_by_id(t, out.labels.at(r, c)).is_metal;
                if (metal && base.labels.at(r, c) != 0) ++bad;
                if (!metal && out.labels.at(r, c) != base.labels.at(r, c)) ++changed;
            }
        CHECK(bad == 0);
        CHECK(changed == 0);
    }
    CHECK_THROWS_AS(insert_metals(scene, 6, mc, t, 1), validation_error);
}

TEST_CASE("insert_metals reports placement failure when nothing fits") {
    MaterialTable t = build_material_table();
    SceneSpec crowded;
    crowded.fov_mm = 100.0;
    ScenePrimitive big;
    big.shape = ShapeKind::Disk;
    big.radius_mm = 49.5;
    big.material_id = 1;
    crowded.primitives.push_back(big);
    MetalConfig mc;
    mc.size_min_mm = 20.0;
    mc.size_max_mm = 30.0;
    mc.max_attempts = 50;
    CHECK_THROWS_AS(insert_metals(crowded, 1, mc, t, 3), validation_error);
}

TEST_CASE("attenuation_at and metal_mask_image") {
    MaterialTable t = build_material_table();
    SceneSpec scene;
    scene.fov_mm = 100.0;
    LabelImage air = rasterize_labels(scene, 32);
    GridF mu = attenuation_at(air, 65.0, t);
    for (float v : mu.v) CHECK(v == 0.0f);
    GridB mask = metal_mask_image(air, t);
    for (auto v : mask.v) CHECK(v == 0);

    ScenePrimitive disk;
    disk.shape = ShapeKind::Disk;
    disk.radius_mm = 30.0;
    disk.material_id = 13;
    REQUIRE(material_by_id(t, 13).is_metal);
    scene.primitives.push_back(disk);
    LabelImage img = rasterize_labels(scene, 64);
    mask = metal_mask_image(img, t);
    int metal_px = 0, label_px = 0;
    for (size_t i = 0; i < mask.v.size(); ++i) {
        if (mask.v[i]) ++metal_px;
        if (img.labels.v[i] == 13) ++label_px;
    }
    CHECK(metal_px == label_px);
    CHECK(metal_px > 0);

    GridF mu65 = attenuation_at(img, 65.0, t);
    float expect = static_cast<float>(material_by_id(t, 13).mu_at(65.0));
    for (size_t i = 0; i < mu65.v.size(); ++i)
        CHECK(mu65.v[i] == (img.labels.v[i] == 13 ? expect : 0.0f));
}

TEST_CASE("metal mask pixel count equals the rasterized metal label count") {
    MaterialTable t = build_material_table();
    SceneConfig cfg;
    SceneSpec scene = sample_scene(cfg, t, 31);
    scene = insert_metals(scene, 3, MetalConfig{}, t, 32);
    LabelImage img = rasterize_labels(scene, 128);
    GridB mask = metal_mask_image(img, t);
    int from_mask = 0, from_labels = 0;
    for (size_t i = 0; i < mask.v.size(); ++i) {
        if (mask.v[i]) ++from_mask;
        if (material_by_id(t, img.labels.v[i]).is_metal) ++from_labels;
    }
    CHECK(from_mask == from_labels);
}

TEST_CASE("scene JSON round-trip") {
    MaterialTable t = build_material_table();
    SceneConfig cfg;
    SceneSpec scene = sample_scene(cfg, t, 77);
    scene = insert_metals(scene, 2, MetalConfig{}, t, 78);
    SceneSpec back = scene_from_json(scene_to_json(scene));
    REQUIRE(back.primitives.size() == scene.primitives.size());
    for (size_t i = 0; i < scene.primitives.size(); ++i) {
        CHECK(back.primitives[i].cx_mm == scene.primitives[i].cx_mm);
        CHECK(back.primitives[i].radius_mm == scene.primitives[i].radius_mm);
        CHECK(back.primitives[i].rotation_rad == scene.primitives[i].rotation_rad);
        CHECK(back.primitives[i].material_id == scene.primitives[i].material_id);
    }
}
