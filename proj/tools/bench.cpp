// Timing comparison between the OpenMP kernels and their serial reference
// implementations, plus a bit-equality check on each pair.

#include <omp.h>

#include <chrono>
#include <cstdio>

#include "ctmar/mar_classical.hpp"
#include "ctmar/physics.hpp"
#include "ctmar/pipeline.hpp"
#include "ctmar/recon.hpp"

using namespace ctmar;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename F>
double time_call(F&& f) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    return seconds_since(t0);
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
    std::printf("%-18s serial %8.3f s   openmp %8.3f s   speedup %5.2fx   bit-identical: %s\n", name,
                serial_s, parallel_s, serial_s / parallel_s, identical ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
    int grid = 256;
    if (argc > 1) grid = std::atoi(argv[1]);
    std::printf("threads: %d, grid: %d\n", omp_get_max_threads(), grid);

    MaterialTable table = build_material_table();
    RunConfig cfg = make_profile("desk");
    cfg.grid = grid;
    cfg.geometry.n_angles = 2 * grid;
    cfg.geometry.n_detectors = grid;
    cfg.fbp_config.n_pixels = grid;

    SceneSpec scene = sample_scene(cfg.scene, table, 11);
    scene = insert_metals(scene, 2, cfg.metal, table, 12);
    LabelImage labels = rasterize_labels(scene, cfg.grid);
    Image mu;
    mu.values = attenuation_at(labels, 65.0, table);
    mu.pixel_pitch_mm = labels.pixel_pitch_mm;

    Sinogram sp, ss;
    double t_par = time_call([&] { sp = forward_project(mu, cfg.geometry); });
    double t_ser = time_call([&] { ss = ref::forward_project(mu, cfg.geometry); });
    report("forward_project", t_ser, t_par, sp.values == ss.values);

    SourceSpectrum spectrum = default_spectrum(5, 10.0, 130.0, cfg.i0);
    std::vector<GridF> stack(5, sp.values);
    NoiseConfig noise{true, true, 99, 1e3};
    Sinogram mp, ms;
    t_par = time_call([&] { mp = measure(stack, spectrum, cfg.detector, noise, cfg.geometry); });
    t_ser = time_call([&] { ms = ref::measure(stack, spectrum, cfg.detector, noise, cfg.geometry); });
    report("measure", t_ser, t_par, mp.values == ms.values);

    Image fp, fs;
    t_par = time_call([&] { fp = fbp(mp, cfg.fbp_config); });
    t_ser = time_call([&] { fs = ref::fbp(mp, cfg.fbp_config); });
    report("fbp", t_ser, t_par, fp.values == fs.values);

    GridB metal_mask = metal_mask_image(labels, table);
    SinogramMask trace = project_metal_mask(metal_mask, labels.pixel_pitch_mm, cfg.geometry, 2);
    Sinogram masked = apply_mask(mp, trace);
    Sinogram wp, ws;
    t_par = time_call([&] { wp = wnn_mar(masked, trace); });
    t_ser = time_call([&] { ws = ref::wnn_mar(masked, trace); });
    report("wnn_mar", t_ser, t_par, wp.values == ws.values);

    return 0;
}
