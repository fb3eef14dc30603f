#pragma once

#include <string>
#include <vector>

#include "ctmar/network.hpp"
#include "ctmar/projector.hpp"

namespace ctmar::nn {

// One training example: x = masked-filled incomplete sinogram, y = reference,
// mask = deleted-data trace. All (1-channel) images share dims.
template <typename T>
struct Example {
    Tensor4<T> x, y, mask;
};

template <typename T>
struct Batch {
    Tensor4<T> x, y, mask;  // (B,1,H,W)
};

struct TrainSchedule {
    int epochs = 8;
    int batch_size = 6;
    int warmup_epochs = 4;  // epoch k in 1..warmup runs (6-k) D steps per G step
    double lambda = 10.0;
    AdvVariant g_adv_variant = AdvVariant::NonSaturating;
    std::uint64_t seed = 0;

    int d_steps_for_epoch(int epoch_1based) const {
        return epoch_1based <= warmup_epochs ? 6 - epoch_1based : 1;
    }
    void validate() const;
};

// forward-only loss evaluation (the quantity the training steps differentiate)
template <typename T>
LossParts<T> cgan_losses(const Batch<T>& batch, Generator<T>& g, Discriminator<T>& d, T lambda,
                         AdvVariant variant, std::uint64_t dropout_key);

// loss parts computed directly from discriminator outputs (1-pixel oracle form)
template <typename T>
T loss_d_from_probs(const Tensor4<T>& d_real, const Tensor4<T>& d_fake);
template <typename T>
T loss_g_adv_from_probs(const Tensor4<T>& d_fake, AdvVariant variant);

template <typename T>
struct DStepOut {
    T loss_d{};
    typename Discriminator<T>::Grads grads;
};

template <typename T>
struct GStepOut {
    T adv{}, l2{}, loss_g{};
    typename Generator<T>::Grads grads;
};

template <typename T>
DStepOut<T> d_step_grads(const Batch<T>& batch, Generator<T>& g, Discriminator<T>& d,
                         std::uint64_t dropout_key);

template <typename T>
GStepOut<T> g_step_grads(const Batch<T>& batch, Generator<T>& g, Discriminator<T>& d, T lambda,
                         AdvVariant variant, std::uint64_t dropout_key);

struct LossLogRow {
    std::int64_t iter = 0;  // G-step index
    double loss_d = 0.0;
    double loss_g_adv = 0.0;
    double loss_g_l2 = 0.0;
};

struct TrainResult {
    Generator<float> generator;
    Discriminator<float> discriminator;
    std::vector<LossLogRow> loss_log;
    std::int64_t g_steps = 0;
};

// Mini-batch CGAN training: per epoch the shuffled batch stream is consumed
// by alternating groups of (d_steps) D updates and one G update. Fixed seed
// and thread count give identical loss logs.
TrainResult train(const std::vector<Example<float>>& dataset, const TrainSchedule& schedule,
                  const GeneratorSpec& gen_spec, const DiscriminatorSpec& disc_spec);

// Eval-mode completion: batch-norm running stats, dropout off. x is the
// masked sinogram, mask the metal trace; unmasked bins pass through.
Sinogram infer(const Sinogram& x, const SinogramMask& mask, Generator<float>& g);

std::string loss_log_csv(const std::vector<LossLogRow>& log);

// Checkpoint: "DMARW1\n" magic, one JSON header line (specs, shapes,
// schedule, seed, iteration), then the parameter tensors (trainables, then BN
// running stats) as raw little-endian float32 in declaration order.
struct Checkpoint {
    GeneratorSpec gen_spec;
    DiscriminatorSpec disc_spec;
    int disc_h = 0, disc_w = 0;
    TrainSchedule schedule;
    std::int64_t iteration = 0;
    Generator<float> generator;
    Discriminator<float> discriminator;
};

void save_checkpoint(const std::string& path, Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ctmar::nn
