// ctmar command line: scene simulation, reconstruction, sinogram completion,
// training, and diagnostics.

#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "ctmar/containers.hpp"
#include "ctmar/pipeline.hpp"
#include "json.hpp"

using namespace ctmar;

namespace {

struct GlobalOpts {
    std::string profile = "desk";
    std::string config_path;
    std::uint64_t seed = 0;
    int threads = 0;
};

RunConfig resolve_config(const GlobalOpts& g) {
    RunConfig cfg = make_profile(g.profile);
    if (!g.config_path.empty()) cfg = apply_config_json(cfg, read_text_file(g.config_path));
    if (g.threads > 0) omp_set_num_threads(g.threads);
    return cfg;
}

// reads either a sinogram or an image container by extension
GridF read_any_values(const std::string& path, const ScanGeometry* geom = nullptr) {
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".sino") == 0)
        return read_sinogram(path, geom).values;
    return read_image(path).values;
}

nn::Generator<float> load_generator(const std::string& checkpoint_path) {
    nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint_path);
    return ckpt.generator;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"desk-scale CT metal-artifact-reduction toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--profile", g.profile, "parameter profile: desk | paper | toy")->capture_default_str();
    app.add_option("--config", g.config_path, "JSON config overriding profile fields");
    app.add_option("--seed", g.seed, "master seed")->capture_default_str();
    app.add_option("--threads", g.threads, "OpenMP thread count (0 = runtime default)");

    // gen-materials
    auto* gm = app.add_subcommand("gen-materials", "write the built-in material table as JSON");
    std::string gm_out = "materials.json";
    gm->add_option("--out", gm_out, "output file")->capture_default_str();
    gm->callback([&] { write_text_file(gm_out, material_table_to_json(build_material_table())); });

    // gen-dataset
    auto* gd = app.add_subcommand("gen-dataset", "generate training pairs (incomplete/reference sinograms)");
    std::string gd_out = "dataset";
    int gd_n = 16, gd_metals = 5;
    bool gd_no_flips = false;
    gd->add_option("--out", gd_out, "output directory")->capture_default_str();
    gd->add_option("--scenes", gd_n, "number of scenes")->capture_default_str();
    gd->add_option("--metals-max", gd_metals, "max metals per scene (1..5)")->capture_default_str();
    gd->add_flag("--no-flips", gd_no_flips, "skip detector-axis flip augmentation");
    gd->callback([&] {
        RunConfig cfg = resolve_config(g);
        gen_dataset(gd_out, gd_n, gd_metals, !gd_no_flips, cfg, g.seed);
        std::printf("wrote %s/manifest.json\n", gd_out.c_str());
    });

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate one scene and write its measurement sinogram");
    std::string sim_out = "sim";
    int sim_metals = 1;
    bool sim_render = false;
    sim->add_option("--out", sim_out, "output directory")->capture_default_str();
    sim->add_option("--metals", sim_metals, "number of metal objects (0..5)")->capture_default_str();
    sim->add_flag("--render", sim_render, "also write PNG renders");
    sim->callback([&] {
        RunConfig cfg = resolve_config(g);
        MaterialTable table = build_material_table();
        SourceSpectrum spectrum = cfg.spectrum();
        std::filesystem::create_directories(sim_out);
        SceneSpec scene = sample_scene(cfg.scene, table, mix_seed(g.seed, 1));
        scene = insert_metals(scene, sim_metals, cfg.metal, table, mix_seed(g.seed, 2));
        LabelImage labels = rasterize_labels(scene, cfg.grid);
        std::vector<GridF> stack = line_integral_stack(labels, table, spectrum, cfg.geometry);
        NoiseConfig noise = cfg.noise;
        noise.seed = mix_seed(g.seed, 3);
        Sinogram sino = measure(stack, spectrum, cfg.detector, noise, cfg.geometry);
        GridB metal_mask = metal_mask_image(labels, table);
        write_text_file(sim_out + "/scene.json", scene_to_json(scene));
        write_sinogram(sim_out + "/measured.sino", sino);
        write_image_mask(sim_out + "/metal_mask.mask", metal_mask, labels.pixel_pitch_mm);
        if (sim_render) render_gray(sim_out + "/measured.png", sino.values, 0.0, 5.0);
        std::printf("wrote %s/measured.sino (%d metals)\n", sim_out.c_str(), sim_metals);
    });

    // fbp
    auto* fb = app.add_subcommand("fbp", "reconstruct a sinogram container");
    std::string fb_in, fb_out = "recon.img";
    std::string fb_render;
    fb->add_option("input", fb_in, "sinogram container")->required();
    fb->add_option("--out", fb_out, "output image container")->capture_default_str();
    fb->add_option("--render", fb_render, "optional PNG/PGM render path");
    fb->callback([&] {
        RunConfig cfg = resolve_config(g);
        Sinogram sino = read_sinogram(fb_in);
        Image img = fbp(sino, cfg.fbp_config);
        write_image(fb_out, img);
        if (!fb_render.empty()) render_gray(fb_render, img.values, 0.0, 0.4);
    });

    // segment
    auto* sg = app.add_subcommand("segment", "threshold + morphology metal segmentation of a recon image");
    std::string sg_in, sg_out = "metal.mask";
    sg->add_option("input", sg_in, "image container")->required();
    sg->add_option("--out", sg_out, "output mask container")->capture_default_str();
    sg->callback([&] {
        RunConfig cfg = resolve_config(g);
        Image img = read_image(sg_in);
        GridB mask = segment_metal(img, cfg.segment_threshold_mhu, cfg.segment_erode_px,
                                   cfg.segment_dilate_px);
        write_image_mask(sg_out, mask, img.pixel_pitch_mm);
    });

    // mar
    auto* mr = app.add_subcommand("mar", "end-to-end metal artifact reduction");
    std::string mr_in, mr_method = "li", mr_ckpt, mr_oracle, mr_outdir = "mar_out", mr_ref;
    mr->add_option("input", mr_in, "measured sinogram container")->required();
    mr->add_option("--method", mr_method, "none | li | wnn | learned")->capture_default_str();
    mr->add_option("--checkpoint", mr_ckpt, "generator checkpoint (learned method)");
    mr->add_option("--oracle-mask", mr_oracle, "image-domain metal mask container (skip segmentation)");
    mr->add_option("--reference", mr_ref, "metal-free reference sinogram for metrics");
    mr->add_option("--out", mr_outdir, "output directory")->capture_default_str();
    mr->callback([&] {
        RunConfig cfg = resolve_config(g);
        Sinogram sino = read_sinogram(mr_in);
        cfg.geometry = sino.geom;
        MarMethod method = mar_method_from_name(mr_method);
        std::optional<nn::Generator<float>> gen;
        if (method == MarMethod::Learned) {
            if (mr_ckpt.empty()) throw validation_error("mar: learned method needs --checkpoint");
            gen = load_generator(mr_ckpt);
        }
        std::optional<GridB> oracle;
        if (!mr_oracle.empty()) oracle = read_image_mask(mr_oracle);
        std::filesystem::create_directories(mr_outdir);
        MarResult res = run_mar(sino, method, cfg, gen ? &*gen : nullptr, oracle ? &*oracle : nullptr);
        write_sinogram(mr_outdir + "/completed.sino", res.completed);
        write_image(mr_outdir + "/recon.img", res.reconstruction);
        write_image(mr_outdir + "/uncorrected.img", res.uncorrected);
        write_mask(mr_outdir + "/sino_mask.mask", res.sino_mask, sino.geom);
        if (!mr_ref.empty()) {
            Sinogram ref = read_sinogram(mr_ref);
            nlohmann::json metrics{{"sinogram_mse", mse(res.completed.values, ref.values)}};
            bool any = false;
            for (auto v : res.sino_mask.values.v)
                if (v) any = true;
            if (any)
                metrics["sinogram_masked_mse"] =
                    masked_mse(res.completed.values, ref.values, res.sino_mask.values);
            write_text_file(mr_outdir + "/metrics.json", metrics.dump(2) + "\n");
        }
        std::printf("wrote %s/recon.img (method %s)\n", mr_outdir.c_str(), mr_method.c_str());
    });

    // train
    auto* tr = app.add_subcommand("train", "train the completion network on a generated dataset");
    std::string tr_dataset = "dataset", tr_ckpt = "model.ckpt", tr_log = "loss_log.csv";
    int tr_epochs = 0;
    tr->add_option("--dataset", tr_dataset, "dataset directory with manifest.json")->capture_default_str();
    tr->add_option("--out", tr_ckpt, "checkpoint output")->capture_default_str();
    tr->add_option("--loss-log", tr_log, "CSV loss log output")->capture_default_str();
    tr->add_option("--epochs", tr_epochs, "override schedule epochs");
    tr->callback([&] {
        RunConfig cfg = resolve_config(g);
        DatasetManifest manifest = manifest_from_json(read_text_file(tr_dataset + "/manifest.json"));
        int ph = 0, pw = 0;
        std::vector<nn::Example<float>> examples =
            load_examples(tr_dataset, manifest, cfg.gen_spec.depth, &ph, &pw);
        nn::TrainSchedule schedule = cfg.schedule;
        schedule.seed = g.seed;
        if (tr_epochs > 0) schedule.epochs = tr_epochs;
        nn::TrainResult result = nn::train(examples, schedule, cfg.gen_spec, cfg.disc_spec);
        nn::Checkpoint ckpt;
        ckpt.gen_spec = cfg.gen_spec;
        ckpt.disc_spec = cfg.disc_spec;
        ckpt.disc_h = ph;
        ckpt.disc_w = pw;
        ckpt.schedule = schedule;
        ckpt.iteration = result.g_steps;
        ckpt.generator = std::move(result.generator);
        ckpt.discriminator = std::move(result.discriminator);
        nn::save_checkpoint(tr_ckpt, ckpt);
        write_text_file(tr_log, nn::loss_log_csv(result.loss_log));
        std::printf("trained %lld generator steps; wrote %s and %s\n",
                    static_cast<long long>(result.g_steps), tr_ckpt.c_str(), tr_log.c_str());
    });

    // infer
    auto* in = app.add_subcommand("infer", "complete a masked sinogram with a trained generator");
    std::string in_sino, in_mask, in_ckpt, in_out = "completed.sino";
    in->add_option("input", in_sino, "incomplete sinogram container")->required();
    in->add_option("--mask", in_mask, "sinogram mask container")->required();
    in->add_option("--checkpoint", in_ckpt, "generator checkpoint")->required();
    in->add_option("--out", in_out, "output sinogram container")->capture_default_str();
    in->callback([&] {
        Sinogram sino = read_sinogram(in_sino);
        SinogramMask mask = read_mask(in_mask);
        if (!sino.values.same_shape(mask.values)) throw validation_error("infer: shape mismatch");
        nn::Generator<float> gen = load_generator(in_ckpt);
        auto [ph, pw] =
            learned_pad_shape(sino.geom, sino.values.rows, sino.values.cols, gen.spec.depth);
        Sinogram done = nn::infer(pad_sinogram(sino, ph, pw), pad_mask(mask, ph, pw), gen);
        Sinogram cropped = crop_sinogram(done, sino.values.rows, sino.values.cols);
        cropped.geom = sino.geom;
        cropped.unit = sino.unit;
        write_sinogram(in_out, cropped);
    });

    // metrics
    auto* me = app.add_subcommand("metrics", "MSE / SSIM / PSNR between two containers");
    std::string me_ref, me_test, me_mask, me_out;
    me->add_option("reference", me_ref, "reference container (.sino or .img)")->required();
    me->add_option("test", me_test, "test container")->required();
    me->add_option("--mask", me_mask, "optional sinogram mask for masked MSE");
    me->add_option("--out", me_out, "write metrics JSON here instead of stdout");
    me->callback([&] {
        GridF ref = read_any_values(me_ref);
        GridF test = read_any_values(me_test);
        nlohmann::json j{{"mse", mse(ref, test)}, {"psnr_db", psnr(ref, test)}};
        if (ref.rows >= 11 && ref.cols >= 11) j["ssim"] = ssim(ref, test);
        if (!me_mask.empty()) {
            SinogramMask mask = read_mask(me_mask);
            j["masked_mse"] = masked_mse(ref, test, mask.values);
        }
        std::string text = j.dump(2) + "\n";
        if (me_out.empty())
            std::fputs(text.c_str(), stdout);
        else
            write_text_file(me_out, text);
    });

    // attention
    auto* at = app.add_subcommand("attention", "occlusion attention map for a completion method");
    std::string at_sino, at_mask, at_ref, at_method = "li", at_ckpt, at_out = "attention.img",
                at_render;
    at->add_option("input", at_sino, "incomplete sinogram container")->required();
    at->add_option("--mask", at_mask, "sinogram mask container")->required();
    at->add_option("--reference", at_ref, "reference sinogram container")->required();
    at->add_option("--method", at_method, "li | wnn | learned")->capture_default_str();
    at->add_option("--checkpoint", at_ckpt, "generator checkpoint (learned)");
    at->add_option("--out", at_out, "output image container")->capture_default_str();
    at->add_option("--render", at_render, "optional PNG render (min/max normalized)");
    at->callback([&] {
        Sinogram sino = read_sinogram(at_sino);
        SinogramMask mask = read_mask(at_mask);
        Sinogram ref = read_sinogram(at_ref);
        Completer completer;
        std::optional<nn::Generator<float>> gen;
        MarMethod method = mar_method_from_name(at_method);
        if (method == MarMethod::Li) {
            completer = [](const Sinogram& x, const SinogramMask& m) { return li_mar(x, m); };
        } else if (method == MarMethod::Wnn) {
            completer = [](const Sinogram& x, const SinogramMask& m) { return wnn_mar(x, m); };
        } else if (method == MarMethod::Learned) {
            if (at_ckpt.empty()) throw validation_error("attention: learned method needs --checkpoint");
            gen = load_generator(at_ckpt);
            completer = [&gen](const Sinogram& x, const SinogramMask& m) {
                auto [ph, pw] =
                    learned_pad_shape(x.geom, x.values.rows, x.values.cols, gen->spec.depth);
                Sinogram done = nn::infer(pad_sinogram(x, ph, pw), pad_mask(m, ph, pw), *gen);
                Sinogram out = crop_sinogram(done, x.values.rows, x.values.cols);
                out.geom = x.geom;
                return out;
            };
        } else {
            throw validation_error("attention: method must be li, wnn, or learned");
        }
        AttentionConfig acfg;
        acfg.seed = g.seed;
        AttentionMap map = attention_map(completer, sino, mask, ref, acfg);
        Image img;
        img.pixel_pitch_mm = 1.0;
        img.provenance = "reference";
        img.values = GridF(map.values.rows, map.values.cols);
        double lo = 0.0, hi = 0.0;
        bool first = true;
        for (double v : map.values.v) {
            if (!std::isfinite(v)) continue;  // -inf sentinels excluded from normalization
            if (first) {
                lo = hi = v;
                first = false;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        for (size_t i = 0; i < map.values.v.size(); ++i)
            img.values.v[i] = static_cast<float>(std::isfinite(map.values.v[i]) ? map.values.v[i] : lo);
        write_image(at_out, img);
        if (!at_render.empty()) render_gray(at_render, img.values, lo, hi > lo ? hi : lo + 1.0);
        std::printf("attention grid %dx%d, baseline mse %.6g\n", map.values.rows, map.values.cols,
                    map.baseline_mse);
    });

    // render
    auto* re = app.add_subcommand("render", "windowed 8-bit render of a container");
    std::string re_in, re_out = "render.png";
    double re_lo = 0.0, re_hi = 5.0;
    re->add_option("input", re_in, "sinogram or image container")->required();
    re->add_option("--out", re_out, "output .png or .pgm")->capture_default_str();
    re->add_option("--lo", re_lo, "window low")->capture_default_str();
    re->add_option("--hi", re_hi, "window high")->capture_default_str();
    re->callback([&] { render_gray(re_out, read_any_values(re_in), re_lo, re_hi); });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const validation_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const io_error& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
