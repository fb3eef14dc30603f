#include "ctmar/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace ctmar::nn {

namespace {

constexpr double kProbClamp = 1e-7;

template <typename T>
T clamp_prob(T p) {
    return std::min(std::max(p, static_cast<T>(kProbClamp)), static_cast<T>(1.0 - kProbClamp));
}

}  // namespace

void TrainSchedule::validate() const {
    if (epochs < 1) throw validation_error("schedule: epochs must be >= 1");
    if (batch_size < 1) throw validation_error("schedule: batch_size must be >= 1");
    if (lambda < 0.0) throw validation_error("schedule: lambda must be >= 0");
    if (warmup_epochs < 0 || warmup_epochs > 5)
        throw validation_error("schedule: warmup_epochs must be in 0..5 (D steps are 6-k)");
}

template <typename T>
T loss_d_from_probs(const Tensor4<T>& d_real, const Tensor4<T>& d_fake) {
    if (d_real.v.size() != d_fake.v.size()) throw validation_error("loss_d: batch mismatch");
    T acc{};
    for (size_t i = 0; i < d_real.v.size(); ++i)
        acc += std::log(clamp_prob(d_real.v[i])) + std::log(T(1) - clamp_prob(d_fake.v[i]));
    return -acc / static_cast<T>(d_real.v.size());
}

template <typename T>
T loss_g_adv_from_probs(const Tensor4<T>& d_fake, AdvVariant variant) {
    T acc{};
    for (size_t i = 0; i < d_fake.v.size(); ++i) {
        T p = clamp_prob(d_fake.v[i]);
        acc += variant == AdvVariant::NonSaturating ? -std::log(p) : std::log(T(1) - p);
    }
    return acc / static_cast<T>(d_fake.v.size());
}

template <typename T>
LossParts<T> cgan_losses(const Batch<T>& batch, Generator<T>& g, Discriminator<T>& d, T lambda,
                         AdvVariant variant, std::uint64_t dropout_key) {
    if (batch.x.n < 1) throw validation_error("cgan_losses: empty batch");
    Tensor4<T> gx = g.forward(batch.x, batch.mask, Mode::Train, dropout_key, nullptr);
    Tensor4<T> d_real = d.forward(batch.x, batch.y, Mode::Train, nullptr);
    Tensor4<T> d_fake = d.forward(batch.x, gx, Mode::Train, nullptr);
    LossParts<T> parts;
    parts.loss_d = loss_d_from_probs(d_real, d_fake);
    parts.adv = loss_g_adv_from_probs(d_fake, variant);
    T sq{};
    for (size_t i = 0; i < gx.v.size(); ++i) {
        T e = batch.y.v[i] - gx.v[i];
        sq += e * e;
    }
    parts.l2 = lambda * sq / static_cast<T>(gx.v.size());
    parts.loss_g = parts.adv + parts.l2;
    return parts;
}

template <typename T>
DStepOut<T> d_step_grads(const Batch<T>& batch, Generator<T>& g, Discriminator<T>& d,
                         std::uint64_t dropout_key) {
    const T inv_b = T(1) / static_cast<T>(batch.x.n);
    // fakes from the current generator; no G gradient on a D step
    Tensor4<T> gx = g.forward(batch.x, batch.mask, Mode::Train, dropout_key, nullptr);

    typename Discriminator<T>::Cache real_cache, fake_cache;
    Tensor4<T> d_real = d.forward(batch.x, batch.y, Mode::Train, &real_cache);
    Tensor4<T> d_fake = d.forward(batch.x, gx, Mode::Train, &fake_cache);

    DStepOut<T> out;
    out.loss_d = loss_d_from_probs(d_real, d_fake);

    Tensor4<T> dreal(d_real.n, 1, 1, 1);
    Tensor4<T> dfake(d_fake.n, 1, 1, 1);
    for (int i = 0; i < d_real.n; ++i) {
        dreal.v[static_cast<size_t>(i)] = -inv_b / clamp_prob(d_real.v[static_cast<size_t>(i)]);
        dfake.v[static_cast<size_t>(i)] = inv_b / (T(1) - clamp_prob(d_fake.v[static_cast<size_t>(i)]));
    }
    typename Discriminator<T>::Grads gr = d.backward(real_cache, dreal, nullptr);
    typename Discriminator<T>::Grads gf = d.backward(fake_cache, dfake, nullptr);
    auto add = [](Tensor4<T>& a, const Tensor4<T>& b) {
        for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
    };
    for (size_t i = 0; i < gr.convs.size(); ++i) {
        add(gr.convs[i].w, gf.convs[i].w);
        add(gr.convs[i].b, gf.convs[i].b);
        add(gr.bns[i].gamma, gf.bns[i].gamma);
        add(gr.bns[i].beta, gf.bns[i].beta);
    }
    add(gr.dense.w, gf.dense.w);
    add(gr.dense.b, gf.dense.b);
    out.grads = std::move(gr);
    return out;
}

template <typename T>
GStepOut<T> g_step_grads(const Batch<T>& batch, Generator<T>& g, Discriminator<T>& d, T lambda,
                         AdvVariant variant, std::uint64_t dropout_key) {
    const T inv_b = T(1) / static_cast<T>(batch.x.n);
    typename Generator<T>::Cache g_cache;
    Tensor4<T> gx = g.forward(batch.x, batch.mask, Mode::Train, dropout_key, &g_cache);

    typename Discriminator<T>::Cache d_cache;
    Tensor4<T> d_fake = d.forward(batch.x, gx, Mode::Train, &d_cache);

    GStepOut<T> out;
    out.adv = loss_g_adv_from_probs(d_fake, variant);

    Tensor4<T> dfake(d_fake.n, 1, 1, 1);
    for (int i = 0; i < d_fake.n; ++i) {
        T p = clamp_prob(d_fake.v[static_cast<size_t>(i)]);
        dfake.v[static_cast<size_t>(i)] =
            variant == AdvVariant::NonSaturating ? -inv_b / p : -inv_b / (T(1) - p);
    }
    Tensor4<T> d_gx;
    d.backward(d_cache, dfake, &d_gx);  // discriminator grads discarded on a G step

    // lambda * mean((y - G)^2) over all elements
    T sq{};
    const T scale = T(2) * lambda / static_cast<T>(gx.v.size());
    for (size_t i = 0; i < gx.v.size(); ++i) {
        T e = batch.y.v[i] - gx.v[i];
        sq += e * e;
        d_gx.v[i] += -scale * e;
    }
    out.l2 = lambda * sq / static_cast<T>(gx.v.size());
    out.loss_g = out.adv + out.l2;
    out.grads = g.backward(g_cache, d_gx);
    return out;
}

namespace {

Batch<float> gather_batch(const std::vector<Example<float>>& dataset, const std::vector<size_t>& order,
                          size_t first, int batch_size) {
    const Tensor4<float>& proto = dataset[order[first]].x;
    Batch<float> b;
    b.x = Tensor4<float>(batch_size, 1, proto.h, proto.w);
    b.y = Tensor4<float>(batch_size, 1, proto.h, proto.w);
    b.mask = Tensor4<float>(batch_size, 1, proto.h, proto.w);
    const size_t plane = static_cast<size_t>(proto.h) * proto.w;
    for (int i = 0; i < batch_size; ++i) {
        const Example<float>& ex = dataset[order[first + static_cast<size_t>(i)]];
        if (ex.x.h != proto.h || ex.x.w != proto.w) throw validation_error("train: mixed sinogram dims");
        std::copy(ex.x.v.begin(), ex.x.v.end(), b.x.v.begin() + static_cast<std::ptrdiff_t>(i * plane));
        std::copy(ex.y.v.begin(), ex.y.v.end(), b.y.v.begin() + static_cast<std::ptrdiff_t>(i * plane));
        std::copy(ex.mask.v.begin(), ex.mask.v.end(),
                  b.mask.v.begin() + static_cast<std::ptrdiff_t>(i * plane));
    }
    return b;
}

}  // namespace

TrainResult train(const std::vector<Example<float>>& dataset, const TrainSchedule& schedule,
                  const GeneratorSpec& gen_spec, const DiscriminatorSpec& disc_spec) {
    schedule.validate();
    if (dataset.size() < static_cast<size_t>(schedule.batch_size))
        throw validation_error("train: dataset smaller than one batch");
    const int h = dataset[0].x.h, w = dataset[0].x.w;

    TrainResult res;
    Rng init_rng(mix_seed(schedule.seed, 0x1417ULL));
    res.generator.spec = gen_spec;
    res.generator.init(init_rng);
    res.discriminator.spec = disc_spec;
    res.discriminator.init(h, w, init_rng);

    AdamState<float> g_state, d_state;
    g_state.init(res.generator.params());
    d_state.init(res.discriminator.params());

    std::vector<size_t> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(mix_seed(schedule.seed, 0x5471eULL));

    std::int64_t step_counter = 0;  // every optimizer step, D or G
    double last_loss_d = 0.0;
    for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
        // Fisher-Yates with the seeded stream
        for (size_t i = order.size() - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i)));
            std::swap(order[i], order[j]);
        }
        const int d_per_g = schedule.d_steps_for_epoch(epoch);
        int d_remaining = d_per_g;
        const size_t n_batches = dataset.size() / static_cast<size_t>(schedule.batch_size);
        for (size_t bi = 0; bi < n_batches; ++bi) {
            Batch<float> batch = gather_batch(dataset, order, bi * static_cast<size_t>(schedule.batch_size),
                                              schedule.batch_size);
            std::uint64_t drop_key = mix_seed(schedule.seed, 0xd0d0ULL + static_cast<std::uint64_t>(step_counter));
            if (d_remaining > 0) {
                DStepOut<float> out = d_step_grads(batch, res.generator, res.discriminator, drop_key);
                if (!std::isfinite(out.loss_d))
                    throw numeric_error("train: non-finite discriminator loss at step " +
                                        std::to_string(step_counter));
                adam_step(res.discriminator.params(), grad_list<float>(out.grads), d_state);
                last_loss_d = out.loss_d;
                --d_remaining;
            } else {
                GStepOut<float> out = g_step_grads(batch, res.generator, res.discriminator,
                                                   static_cast<float>(schedule.lambda),
                                                   schedule.g_adv_variant, drop_key);
                if (!std::isfinite(out.loss_g))
                    throw numeric_error("train: non-finite generator loss at step " +
                                        std::to_string(step_counter));
                adam_step(res.generator.params(), grad_list<float>(out.grads), g_state);
                res.g_steps += 1;
                res.loss_log.push_back({res.g_steps, last_loss_d, static_cast<double>(out.adv),
                                        static_cast<double>(out.l2)});
                d_remaining = d_per_g;
            }
            ++step_counter;
        }
    }
    return res;
}

Sinogram infer(const Sinogram& x, const SinogramMask& mask, Generator<float>& g) {
    if (!x.values.same_shape(mask.values)) throw validation_error("infer: shape mismatch");
    Tensor4<float> tx(1, 1, x.values.rows, x.values.cols);
    Tensor4<float> tm(1, 1, x.values.rows, x.values.cols);
    for (size_t i = 0; i < x.values.v.size(); ++i) {
        tx.v[i] = x.values.v[i];
        tm.v[i] = mask.values.v[i] ? 1.0f : 0.0f;
    }
    Tensor4<float> out = g.forward(tx, tm, Mode::Eval, 0, nullptr);
    Sinogram done = x;
    for (size_t i = 0; i < done.values.v.size(); ++i) done.values.v[i] = out.v[i];
    return done;
}

std::string loss_log_csv(const std::vector<LossLogRow>& log) {
    std::string out = "iter,loss_d,loss_g_adv,loss_g_l2\n";
    char buf[128];
    for (const LossLogRow& r : log) {
        std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g\n", static_cast<long long>(r.iter), r.loss_d,
                      r.loss_g_adv, r.loss_g_l2);
        out += buf;
    }
    return out;
}

// ---- checkpoint ------------------------------------------------------------------

namespace {

constexpr char kMagic[] = "DMARW1\n";

nlohmann::json spec_json(const GeneratorSpec& s) {
    return {{"depth", s.depth},
            {"widths", s.widths},
            {"leaky_slope", s.leaky_slope},
            {"dropout_p", s.dropout_p},
            {"value_scale", s.value_scale}};
}

nlohmann::json spec_json(const DiscriminatorSpec& s) {
    return {{"widths", s.widths}, {"leaky_slope", s.leaky_slope}};
}

nlohmann::json schedule_json(const TrainSchedule& s) {
    return {{"epochs", s.epochs},
            {"batch_size", s.batch_size},
            {"warmup_epochs", s.warmup_epochs},
            {"lambda", s.lambda},
            {"g_adv_variant", s.g_adv_variant == AdvVariant::NonSaturating ? "non_saturating" : "minimax_literal"},
            {"seed", s.seed}};
}

std::vector<ParamRef<float>> checkpoint_tensors(Generator<float>& g, Discriminator<float>& d) {
    std::vector<ParamRef<float>> all = g.params();
    for (auto& p : g.state_tensors()) all.push_back(p);
    for (auto& p : d.params()) all.push_back(p);
    for (auto& p : d.state_tensors()) all.push_back(p);
    return all;
}

}  // namespace

void save_checkpoint(const std::string& path, Checkpoint& ckpt) {
    std::vector<ParamRef<float>> tensors = checkpoint_tensors(ckpt.generator, ckpt.discriminator);
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& p : tensors)
        shapes.push_back({{"name", p.name}, {"dims", {p.tensor->n, p.tensor->c, p.tensor->h, p.tensor->w}}});
    nlohmann::json header{{"generator", spec_json(ckpt.gen_spec)},
                          {"discriminator", spec_json(ckpt.disc_spec)},
                          {"disc_input", {ckpt.disc_h, ckpt.disc_w}},
                          {"schedule", schedule_json(ckpt.schedule)},
                          {"seed", ckpt.schedule.seed},
                          {"iteration", ckpt.iteration},
                          {"tensors", shapes}};
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write checkpoint '" + path + "'");
    f.write(kMagic, 7);
    std::string hdr = header.dump();
    f.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    f.put('\n');
    for (const auto& p : tensors)
        f.write(reinterpret_cast<const char*>(p.tensor->v.data()),
                static_cast<std::streamsize>(p.tensor->v.size() * sizeof(float)));
    if (!f) throw io_error("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot read checkpoint '" + path + "'");
    char magic[7];
    f.read(magic, 7);
    if (!f || std::string(magic, 7) != kMagic) throw validation_error("checkpoint: bad magic");
    std::string hdr;
    std::getline(f, hdr);
    if (!f) throw validation_error("checkpoint: missing header");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(hdr);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("checkpoint: bad header JSON: ") + e.what());
    }

    Checkpoint c;
    c.gen_spec.depth = j.at("generator").at("depth").get<int>();
    c.gen_spec.widths = j.at("generator").at("widths").get<std::vector<int>>();
    c.gen_spec.leaky_slope = j.at("generator").at("leaky_slope").get<double>();
    c.gen_spec.dropout_p = j.at("generator").at("dropout_p").get<double>();
    c.gen_spec.value_scale = j.at("generator").value("value_scale", 1.0);
    c.disc_spec.widths = j.at("discriminator").at("widths").get<std::vector<int>>();
    c.disc_spec.leaky_slope = j.at("discriminator").at("leaky_slope").get<double>();
    c.disc_h = j.at("disc_input").at(0).get<int>();
    c.disc_w = j.at("disc_input").at(1).get<int>();
    const auto& sj = j.at("schedule");
    c.schedule.epochs = sj.at("epochs").get<int>();
    c.schedule.batch_size = sj.at("batch_size").get<int>();
    c.schedule.warmup_epochs = sj.at("warmup_epochs").get<int>();
    c.schedule.lambda = sj.at("lambda").get<double>();
    c.schedule.g_adv_variant = sj.at("g_adv_variant").get<std::string>() == "minimax_literal"
                                   ? AdvVariant::MinimaxLiteral
                                   : AdvVariant::NonSaturating;
    c.schedule.seed = sj.at("seed").get<std::uint64_t>();
    c.iteration = j.at("iteration").get<std::int64_t>();

    Rng dummy(0);
    c.generator.spec = c.gen_spec;
    c.generator.init(dummy);
    c.discriminator.spec = c.disc_spec;
    c.discriminator.init(c.disc_h, c.disc_w, dummy);

    std::vector<ParamRef<float>> tensors = checkpoint_tensors(c.generator, c.discriminator);
    const auto& shapes = j.at("tensors");
    if (shapes.size() != tensors.size()) throw validation_error("checkpoint: tensor count mismatch");
    for (size_t i = 0; i < tensors.size(); ++i) {
        const auto& dims = shapes.at(i).at("dims");
        if (dims.at(0).get<int>() != tensors[i].tensor->n || dims.at(1).get<int>() != tensors[i].tensor->c ||
            dims.at(2).get<int>() != tensors[i].tensor->h || dims.at(3).get<int>() != tensors[i].tensor->w)
            throw validation_error("checkpoint: shape mismatch for " + tensors[i].name);
        f.read(reinterpret_cast<char*>(tensors[i].tensor->v.data()),
               static_cast<std::streamsize>(tensors[i].tensor->v.size() * sizeof(float)));
        if (!f) throw validation_error("checkpoint: payload truncated at " + tensors[i].name);
    }
    return c;
}

template struct DStepOut<float>;
template struct DStepOut<double>;
template struct GStepOut<float>;
template struct GStepOut<double>;
template float loss_d_from_probs<float>(const Tensor4<float>&, const Tensor4<float>&);
template double loss_d_from_probs<double>(const Tensor4<double>&, const Tensor4<double>&);
template float loss_g_adv_from_probs<float>(const Tensor4<float>&, AdvVariant);
template double loss_g_adv_from_probs<double>(const Tensor4<double>&, AdvVariant);
template LossParts<float> cgan_losses<float>(const Batch<float>&, Generator<float>&, Discriminator<float>&,
                                             float, AdvVariant, std::uint64_t);
template LossParts<double> cgan_losses<double>(const Batch<double>&, Generator<double>&,
                                               Discriminator<double>&, double, AdvVariant, std::uint64_t);
template DStepOut<float> d_step_grads<float>(const Batch<float>&, Generator<float>&, Discriminator<float>&,
                                             std::uint64_t);
template DStepOut<double> d_step_grads<double>(const Batch<double>&, Generator<double>&,
                                               Discriminator<double>&, std::uint64_t);
template GStepOut<float> g_step_grads<float>(const Batch<float>&, Generator<float>&, Discriminator<float>&,
                                             float, AdvVariant, std::uint64_t);
template GStepOut<double> g_step_grads<double>(const Batch<double>&, Generator<double>&,
                                               Discriminator<double>&, double, AdvVariant, std::uint64_t);

}  // namespace ctmar::nn
