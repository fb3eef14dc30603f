#pragma once

#include <string>
#include <vector>

#include "ctmar/nn.hpp"

namespace ctmar::nn {

enum class Mode { Train, Eval };

struct GeneratorSpec {
    int depth = 3;                       // down/up levels; paper-scale uses 6
    std::vector<int> widths = {16, 32, 64};
    double leaky_slope = 0.2;
    double dropout_p = 0.5;
    // sinogram values are divided by this before entering the U-Net and the
    // head output is multiplied back, so the network trains in O(1) units
    double value_scale = 5.0;

    void validate() const;
};

struct DiscriminatorSpec {
    std::vector<int> widths = {16, 32, 64};
    double leaky_slope = 0.2;

    void validate() const;
};

template <typename T>
struct ConvParams {
    Tensor4<T> w, b;
};

template <typename T>
struct BnParams {
    Tensor4<T> gamma, beta;
    Tensor4<T> running_mean, running_var;  // not trained
};

// Named parameter reference; declaration order defines the checkpoint layout.
template <typename T>
struct ParamRef {
    std::string name;
    Tensor4<T>* tensor;
};

// U-Net style completion generator. Down: conv5x5/2 + BN + LeakyReLU per
// level; up: tconv5x5/2 + BN + ReLU with skip concatenation from the
// matching down level; dropout after the last BN; 1x1 linear conv to one
// channel. Output is composed as G(x) = x + M .* x_d1, so unmasked bins pass
// through untouched.
template <typename T>
struct Generator {
    GeneratorSpec spec;
    std::vector<ConvParams<T>> down;
    std::vector<BnParams<T>> down_bn;
    std::vector<ConvParams<T>> up;    // tconv weights, layout (c_in, c_out, kh, kw)
    std::vector<BnParams<T>> up_bn;
    ConvParams<T> head;               // final 1x1 conv to 1 channel

    struct Cache {
        Tensor4<T> x, mask;
        std::vector<Tensor4<T>> down_in, down_conv, down_act;
        std::vector<BnCache<T>> down_bn;
        std::vector<Tensor4<T>> up_in, up_tconv, up_act;
        std::vector<BnCache<T>> up_bn;
        Tensor4<T> dropout_mask, head_in, x_d1;
        Mode mode = Mode::Train;
        bool dropout_on = false;
    };

    struct Grads {
        std::vector<ConvParams<T>> down;
        std::vector<BnParams<T>> down_bn;  // gamma/beta slots only
        std::vector<ConvParams<T>> up;
        std::vector<BnParams<T>> up_bn;
        ConvParams<T> head;
    };

    void init(Rng& rng);
    std::vector<ParamRef<T>> params();          // trainable, declaration order
    std::vector<ParamRef<T>> state_tensors();   // running BN stats (checkpointed, not trained)

    // x must be masked-filled (0 on mask); dims divisible by 2^depth.
    // Train mode updates the BN running statistics.
    Tensor4<T> forward(const Tensor4<T>& x, const Tensor4<T>& mask, Mode mode, std::uint64_t dropout_key,
                       Cache* cache);
    // dg is d(loss)/d(G(x)); returns parameter grads (input grad not needed
    // for training and omitted).
    Grads backward(const Cache& cache, const Tensor4<T>& dg) const;
    Grads zero_grads() const;
};

// Full-sinogram discriminator on 2x average-pooled (condition, candidate)
// pairs: stride-2 5x5 convs with BN + LeakyReLU, dense layer to a single
// logit, sigmoid to (0, 1).
template <typename T>
struct Discriminator {
    DiscriminatorSpec spec;
    int input_h = 0, input_w = 0;  // pre-pool sinogram dims, fixed at init
    std::vector<ConvParams<T>> convs;
    std::vector<BnParams<T>> bns;
    ConvParams<T> dense;

    struct Cache {
        Tensor4<T> pooled;
        std::vector<Tensor4<T>> conv_in, conv_out, act_out;
        std::vector<BnCache<T>> bn;
        Tensor4<T> dense_in, logit, prob;
        Mode mode = Mode::Train;
    };

    struct Grads {
        std::vector<ConvParams<T>> convs;
        std::vector<BnParams<T>> bns;
        ConvParams<T> dense;
    };

    void init(int h, int w, Rng& rng);
    std::vector<ParamRef<T>> params();
    std::vector<ParamRef<T>> state_tensors();

    // condition and candidate are (n,1,h,w); output (n,1,1,1) in (0,1)
    Tensor4<T> forward(const Tensor4<T>& condition, const Tensor4<T>& candidate, Mode mode,
                       Cache* cache);
    // dprob is d(loss)/d(D output); returns grads plus the gradient w.r.t.
    // the candidate input (needed to train G through D).
    Grads backward(const Cache& cache, const Tensor4<T>& dprob, Tensor4<T>* d_candidate) const;
    Grads zero_grads() const;
};

enum class AdvVariant { NonSaturating, MinimaxLiteral };

template <typename T>
struct LossParts {
    T loss_d{};
    T loss_g{};
    T adv{};   // generator adversarial part
    T l2{};    // lambda-scaled per-pixel mean squared error part
};

// loss_D = -mean[log D(x,y) + log(1 - D(x,G(x)))]
// loss_G = adv + lambda * mean((y - G(x))^2), adv per the chosen variant.
// D outputs are clamped to [1e-7, 1 - 1e-7] inside the logs.

// ---- Adam ------------------------------------------------------------------

template <typename T>
struct AdamConfig {
    T alpha = static_cast<T>(2e-4);
    T beta1 = static_cast<T>(0.9);
    T beta2 = static_cast<T>(0.999);
    T eps = static_cast<T>(1e-8);
};

template <typename T>
struct AdamState {
    std::vector<Tensor4<T>> m, v;  // one slot per parameter tensor
    std::int64_t t = 0;
    AdamConfig<T> config;

    void init(const std::vector<ParamRef<T>>& params);
};

template <typename T>
void adam_step(const std::vector<ParamRef<T>>& params, const std::vector<const Tensor4<T>*>& grads,
               AdamState<T>& state);

// convenience: collect grad tensors matching params() order
template <typename T>
std::vector<const Tensor4<T>*> grad_list(const typename Generator<T>::Grads& g);
template <typename T>
std::vector<const Tensor4<T>*> grad_list(const typename Discriminator<T>::Grads& g);

extern template struct Generator<float>;
extern template struct Generator<double>;
extern template struct Discriminator<float>;
extern template struct Discriminator<double>;

}  // namespace ctmar::nn
