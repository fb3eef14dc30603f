#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ctmar/containers.hpp"
#include "ctmar/train.hpp"
#include "doctest.h"

using namespace ctmar;
using namespace ctmar::nn;

namespace {

// synthetic completion family: structured sinusoid mixtures with a wobbling
// band mask standing in for a single-disk metal trace
Example<float> toy_example(std::uint64_t seed, int h = 64, int w = 48) {
    Rng rng(mix_seed(seed, 0x70eULL));
    Example<float> ex;
    ex.x = Tensor4<float>(1, 1, h, w);
    ex.y = Tensor4<float>(1, 1, h, w);
    ex.mask = Tensor4<float>(1, 1, h, w);
    double f1 = rng.uniform(0.05, 0.3), f2 = rng.uniform(0.05, 0.3);
    double p1 = rng.uniform(0.0, 6.28), amp = rng.uniform(0.5, 1.5);
    double center = rng.uniform(0.25 * w, 0.75 * w);
    double wobble = rng.uniform(0.1 * w, 0.2 * w);
    double width = rng.uniform(3.0, 6.0);
    for (int r = 0; r < h; ++r) {
        double band = center + wobble * std::sin(3.14159265358979 * r / h + p1);
        for (int c = 0; c < w; ++c) {
            double v = 2.0 + amp * std::sin(f1 * r + p1) * std::cos(f2 * c) +
                       0.8 * std::cos(f2 * r * 0.7 + f1 * c * 1.3);
            ex.y.at(0, 0, r, c) = static_cast<float>(v);
            bool masked = std::abs(c - band) <= 0.5 * width;
            ex.mask.at(0, 0, r, c) = masked ? 1.0f : 0.0f;
            ex.x.at(0, 0, r, c) = masked ? 0.0f : static_cast<float>(v);
        }
    }
    return ex;
}

double heldout_masked_mse(std::vector<Example<float>>& heldout, Generator<float>& g) {
    double acc = 0.0;
    std::int64_t count = 0;
    for (Example<float>& ex : heldout) {
        Tensor4<float> out = g.forward(ex.x, ex.mask, Mode::Eval, 0, nullptr);
        for (size_t i = 0; i < out.v.size(); ++i)
            if (ex.mask.v[i] != 0.0f) {
                double e = static_cast<double>(ex.y.v[i]) - out.v[i];
                acc += e * e;
                ++count;
            }
    }
    return acc / static_cast<double>(count);
}

}  // namespace

TEST_CASE("warmup schedule: 6-k discriminator steps per generator step") {
    TrainSchedule s;
    CHECK(s.d_steps_for_epoch(1) == 5);
    CHECK(s.d_steps_for_epoch(2) == 4);
    CHECK(s.d_steps_for_epoch(3) == 3);
    CHECK(s.d_steps_for_epoch(4) == 2);
    CHECK(s.d_steps_for_epoch(5) == 1);
    CHECK(s.d_steps_for_epoch(25) == 1);

    // 24 tiny examples, batch 2 -> 12 batches per epoch; G steps per epoch are
    // floor(12 / (d_steps+1)): 2, 2, 3, 4, 6 over five epochs
    std::vector<Example<float>> dataset;
    for (int i = 0; i < 24; ++i) dataset.push_back(toy_example(static_cast<std::uint64_t>(i), 8, 8));
    TrainSchedule sched;
    sched.epochs = 5;
    sched.batch_size = 2;
    sched.seed = 3;
    GeneratorSpec gs;
    gs.depth = 2;
    gs.widths = {2, 3};
    DiscriminatorSpec ds;
    ds.widths = {2, 3};
    TrainResult res = train(dataset, sched, gs, ds);
    CHECK(res.g_steps == 2 + 2 + 3 + 4 + 6);
    REQUIRE(res.loss_log.size() == static_cast<size_t>(res.g_steps));
    for (size_t i = 0; i < res.loss_log.size(); ++i)
        CHECK(res.loss_log[i].iter == static_cast<std::int64_t>(i) + 1);
}

TEST_CASE("training is deterministic for a fixed seed") {
    std::vector<Example<float>> dataset;
    for (int i = 0; i < 12; ++i) dataset.push_back(toy_example(static_cast<std::uint64_t>(i) + 50, 8, 8));
    TrainSchedule sched;
    sched.epochs = 2;
    sched.batch_size = 3;
    sched.warmup_epochs = 0;  // 1:1 steps so the log has G rows
    sched.seed = 1234;
    GeneratorSpec gs;
    gs.depth = 2;
    gs.widths = {2, 3};
    DiscriminatorSpec ds;
    ds.widths = {2, 3};
    TrainResult a = train(dataset, sched, gs, ds);
    TrainResult b = train(dataset, sched, gs, ds);
    REQUIRE(a.loss_log.size() > 0);
    REQUIRE(a.loss_log.size() == b.loss_log.size());
    for (size_t i = 0; i < a.loss_log.size(); ++i) {
        CHECK(a.loss_log[i].loss_d == b.loss_log[i].loss_d);
        CHECK(a.loss_log[i].loss_g_adv == b.loss_log[i].loss_g_adv);
        CHECK(a.loss_log[i].loss_g_l2 == b.loss_log[i].loss_g_l2);
    }
    sched.seed = 99;
    TrainResult c = train(dataset, sched, gs, ds);
    bool differs = c.loss_log.size() != a.loss_log.size();
    for (size_t i = 0; !differs && i < c.loss_log.size(); ++i)
        differs = c.loss_log[i].loss_g_l2 != a.loss_log[i].loss_g_l2;
    CHECK(differs);
}

TEST_CASE("toy training run improves held-out masked MSE over initialization") {
    std::vector<Example<float>> dataset, heldout;
    for (int i = 0; i < 96; ++i) dataset.push_back(toy_example(static_cast<std::uint64_t>(i)));
    for (int i = 0; i < 10; ++i) heldout.push_back(toy_example(static_cast<std::uint64_t>(i) + 5000));

    GeneratorSpec gs;
    gs.depth = 3;
    gs.widths = {8, 16, 32};
    DiscriminatorSpec ds;
    ds.widths = {8, 16, 32};
    TrainSchedule sched;
    sched.epochs = 17;  // 24 batches/epoch at 1:1 -> 12 G steps per epoch
    sched.warmup_epochs = 0;
    sched.batch_size = 4;
    sched.seed = 7;

    // baseline: freshly initialized generator (iteration 0)
    Generator<float> init_g;
    init_g.spec = gs;
    Rng init_rng(mix_seed(sched.seed, 0x1417ULL));
    init_g.init(init_rng);
    double before = heldout_masked_mse(heldout, init_g);

    TrainResult res = train(dataset, sched, gs, ds);
    CHECK(res.g_steps >= 200);
    double after = heldout_masked_mse(heldout, res.generator);
    INFO("masked mse before ", before, " after ", after);
    CHECK(after < before);
}

TEST_CASE("infer: eval determinism, unmasked bins preserved, empty mask identity") {
    Rng rng(5);
    Generator<float> g;
    g.spec.depth = 2;
    g.spec.widths = {3, 4};
    g.init(rng);

    Sinogram x;
    x.geom = ScanGeometry{16, 16, 160.0, 0, 0};
    x.values = GridF(16, 16);
    for (auto& v : x.values.v) v = static_cast<float>(rng.uniform(0.0, 3.0));
    SinogramMask mask{GridB(16, 16, 0)};
    for (auto& v : mask.values.v) v = rng.uniform() < 0.3 ? 1 : 0;
    Sinogram xm = apply_mask(x, mask);

    Sinogram a = infer(xm, mask, g);
    Sinogram b = infer(xm, mask, g);
    CHECK(a.values == b.values);
    for (size_t i = 0; i < a.values.v.size(); ++i)
        if (!mask.values.v[i]) CHECK(a.values.v[i] == xm.values.v[i]);

    SinogramMask none{GridB(16, 16, 0)};
    Sinogram same = infer(x, none, g);
    CHECK(same.values == x.values);
}

TEST_CASE("checkpoint round-trip preserves every tensor bit-exactly") {
    std::vector<Example<float>> dataset;
    for (int i = 0; i < 8; ++i) dataset.push_back(toy_example(static_cast<std::uint64_t>(i) + 300, 16, 16));
    TrainSchedule sched;
    sched.epochs = 1;
    sched.batch_size = 2;
    sched.seed = 21;
    GeneratorSpec gs;
    gs.depth = 2;
    gs.widths = {3, 4};
    DiscriminatorSpec ds;
    ds.widths = {3, 4};
    TrainResult res = train(dataset, sched, gs, ds);

    Checkpoint ckpt;
    ckpt.gen_spec = gs;
    ckpt.disc_spec = ds;
    ckpt.disc_h = 16;
    ckpt.disc_w = 16;
    ckpt.schedule = sched;
    ckpt.iteration = res.g_steps;
    ckpt.generator = res.generator;
    ckpt.discriminator = res.discriminator;

    std::string path = (std::filesystem::temp_directory_path() / "ctmar_test.ckpt").string();
    save_checkpoint(path, ckpt);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.iteration == ckpt.iteration);
    CHECK(back.gen_spec.widths == gs.widths);
    CHECK(back.schedule.lambda == sched.lambda);

    auto orig = ckpt.generator.params();
    auto loaded = back.generator.params();
    REQUIRE(orig.size() == loaded.size());
    for (size_t i = 0; i < orig.size(); ++i) CHECK(orig[i].tensor->v == loaded[i].tensor->v);
    auto orig_s = ckpt.generator.state_tensors();
    auto loaded_s = back.generator.state_tensors();
    for (size_t i = 0; i < orig_s.size(); ++i) CHECK(orig_s[i].tensor->v == loaded_s[i].tensor->v);

    // inference agrees after reload
    Sinogram x;
    x.geom = ScanGeometry{16, 16, 160.0, 0, 0};
    x.values = GridF(16, 16, 1.0f);
    SinogramMask m{GridB(16, 16, 0)};
    m.values.at(4, 4) = 1;
    x.values.at(4, 4) = 0.0f;
    CHECK(infer(x, m, ckpt.generator).values == infer(x, m, back.generator).values);

    // corrupted files are rejected
    write_text_file(path + ".bad", "NOTMAGIC what");
    CHECK_THROWS_AS(load_checkpoint(path + ".bad"), validation_error);
    std::string blob = read_text_file(path);
    write_text_file(path + ".trunc", blob.substr(0, blob.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(path + ".trunc"), validation_error);
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".bad");
    std::filesystem::remove(path + ".trunc");
}

TEST_CASE("loss log CSV has the documented columns") {
    std::vector<LossLogRow> log{{1, 1.25, 0.7, 3.5}, {2, 1.0, 0.65, 3.25}};
    std::string csv = loss_log_csv(log);
    CHECK(csv.substr(0, 32) == "iter,loss_d,loss_g_adv,loss_g_l2");
    CHECK(csv.find("1,1.25,0.7,3.5\n") != std::string::npos);
    CHECK(csv.find("2,1,0.65,3.25\n") != std::string::npos);
}
