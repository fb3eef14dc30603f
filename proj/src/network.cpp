#include "ctmar/network.hpp"

#include <cmath>

namespace ctmar::nn {

namespace {

constexpr double kBnMomentum = 0.9;
constexpr double kBnEps = 1e-5;
constexpr double kWeightSigma = 0.02;

template <typename T>
void init_conv(ConvParams<T>& p, int n, int c, int kh, int kw, Rng& rng) {
    p.w = Tensor4<T>(n, c, kh, kw);
    for (auto& v : p.w.v) v = static_cast<T>(kWeightSigma * rng.normal());
}

template <typename T>
void init_bias(Tensor4<T>& b, int n) {
    b = Tensor4<T>(n, 1, 1, 1, T{});
}

template <typename T>
void init_bn(BnParams<T>& p, int c) {
    p.gamma = Tensor4<T>(c, 1, 1, 1, T(1));
    p.beta = Tensor4<T>(c, 1, 1, 1, T{});
    p.running_mean = Tensor4<T>(c, 1, 1, 1, T{});
    p.running_var = Tensor4<T>(c, 1, 1, 1, T(1));
}

template <typename T>
void check_finite(const Tensor4<T>& t, const char* what) {
    for (T v : t.v)
        if (!std::isfinite(static_cast<double>(v))) throw numeric_error(std::string(what) + ": non-finite value");
}

}  // namespace

void GeneratorSpec::validate() const {
    if (depth < 1) throw validation_error("generator: depth must be >= 1");
    if (value_scale <= 0.0) throw validation_error("generator: value_scale must be positive");
    if (static_cast<int>(widths.size()) != depth)
        throw validation_error("generator: widths size must equal depth");
    for (int w : widths)
        if (w < 1) throw validation_error("generator: widths must be >= 1");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw validation_error("generator: dropout_p must be in [0,1)");
}

void DiscriminatorSpec::validate() const {
    if (widths.empty()) throw validation_error("discriminator: needs at least one conv level");
    for (int w : widths)
        if (w < 1) throw validation_error("discriminator: widths must be >= 1");
}

// ---- generator ---------------------------------------------------------------

template <typename T>
void Generator<T>::init(Rng& rng) {
    spec.validate();
    const int d = spec.depth;
    down.assign(static_cast<size_t>(d), {});
    down_bn.assign(static_cast<size_t>(d), {});
    up.assign(static_cast<size_t>(d), {});
    up_bn.assign(static_cast<size_t>(d), {});
    for (int i = 0; i < d; ++i) {
        int cin = i == 0 ? 1 : spec.widths[static_cast<size_t>(i - 1)];
        int cout = spec.widths[static_cast<size_t>(i)];
        init_conv(down[static_cast<size_t>(i)], cout, cin, 5, 5, rng);
        init_bias(down[static_cast<size_t>(i)].b, cout);
        init_bn(down_bn[static_cast<size_t>(i)], cout);
    }
    for (int j = 0; j < d; ++j) {
        int cin = j == 0 ? spec.widths[static_cast<size_t>(d - 1)]
                         : 2 * spec.widths[static_cast<size_t>(d - 1 - j)];
        int cout = j == d - 1 ? spec.widths[0] : spec.widths[static_cast<size_t>(d - 2 - j)];
        // tconv layout (c_in, c_out, kh, kw)
        init_conv(up[static_cast<size_t>(j)], cin, cout, 5, 5, rng);
        init_bias(up[static_cast<size_t>(j)].b, cout);
        init_bn(up_bn[static_cast<size_t>(j)], cout);
    }
    init_conv(head, 1, spec.widths[0], 1, 1, rng);
    init_bias(head.b, 1);
}

template <typename T>
std::vector<ParamRef<T>> Generator<T>::params() {
    std::vector<ParamRef<T>> out;
    for (size_t i = 0; i < down.size(); ++i) {
        out.push_back({"g.down" + std::to_string(i) + ".w", &down[i].w});
        out.push_back({"g.down" + std::to_string(i) + ".b", &down[i].b});
        out.push_back({"g.down" + std::to_string(i) + ".bn.gamma", &down_bn[i].gamma});
        out.push_back({"g.down" + std::to_string(i) + ".bn.beta", &down_bn[i].beta});
    }
    for (size_t j = 0; j < up.size(); ++j) {
        out.push_back({"g.up" + std::to_string(j) + ".w", &up[j].w});
        out.push_back({"g.up" + std::to_string(j) + ".b", &up[j].b});
        out.push_back({"g.up" + std::to_string(j) + ".bn.gamma", &up_bn[j].gamma});
        out.push_back({"g.up" + std::to_string(j) + ".bn.beta", &up_bn[j].beta});
    }
    out.push_back({"g.head.w", &head.w});
    out.push_back({"g.head.b", &head.b});
    return out;
}

template <typename T>
std::vector<ParamRef<T>> Generator<T>::state_tensors() {
    std::vector<ParamRef<T>> out;
    for (size_t i = 0; i < down_bn.size(); ++i) {
        out.push_back({"g.down" + std::to_string(i) + ".bn.rmean", &down_bn[i].running_mean});
        out.push_back({"g.down" + std::to_string(i) + ".bn.rvar", &down_bn[i].running_var});
    }
    for (size_t j = 0; j < up_bn.size(); ++j) {
        out.push_back({"g.up" + std::to_string(j) + ".bn.rmean", &up_bn[j].running_mean});
        out.push_back({"g.up" + std::to_string(j) + ".bn.rvar", &up_bn[j].running_var});
    }
    return out;
}

template <typename T>
Tensor4<T> Generator<T>::forward(const Tensor4<T>& x, const Tensor4<T>& mask, Mode mode,
                                 std::uint64_t dropout_key, Cache* cache) {
    if (!x.same_shape(mask)) throw validation_error("generator: x/mask shape mismatch");
    if (x.c != 1) throw validation_error("generator: expects single-channel input");
    const int d = spec.depth;
    const int div = 1 << d;
    if (x.h % div != 0 || x.w % div != 0)
        throw validation_error("generator: input dims must be divisible by 2^depth");

    Cache local;
    Cache& cc = cache ? *cache : local;
    cc.mode = mode;
    cc.x = x;
    cc.mask = mask;
    cc.down_in.clear();
    cc.down_conv.clear();
    cc.down_act.clear();
    cc.down_bn.assign(static_cast<size_t>(d), {});
    cc.up_in.clear();
    cc.up_tconv.clear();
    cc.up_act.clear();
    cc.up_bn.assign(static_cast<size_t>(d), {});

    const ConvGeom halving = ConvGeom::halving();
    const T slope = static_cast<T>(spec.leaky_slope);
    const T inv_scale = T(1) / static_cast<T>(spec.value_scale);

    Tensor4<T> cur = x;
    for (auto& v : cur.v) v *= inv_scale;
    for (int i = 0; i < d; ++i) {
        cc.down_in.push_back(cur);
        Tensor4<T> conv = conv2d_forward(cur, down[static_cast<size_t>(i)].w, down[static_cast<size_t>(i)].b, halving);
        cc.down_conv.push_back(conv);
        Tensor4<T> bn;
        if (mode == Mode::Train) {
            bn = batchnorm_train_forward(conv, down_bn[static_cast<size_t>(i)].gamma,
                                         down_bn[static_cast<size_t>(i)].beta,
                                         down_bn[static_cast<size_t>(i)].running_mean,
                                         down_bn[static_cast<size_t>(i)].running_var,
                                         static_cast<T>(kBnMomentum), static_cast<T>(kBnEps),
                                         cc.down_bn[static_cast<size_t>(i)]);
        } else {
            bn = batchnorm_eval_forward(conv, down_bn[static_cast<size_t>(i)].gamma,
                                        down_bn[static_cast<size_t>(i)].beta,
                                        down_bn[static_cast<size_t>(i)].running_mean,
                                        down_bn[static_cast<size_t>(i)].running_var, static_cast<T>(kBnEps));
        }
        cur = leaky_relu_forward(bn, slope);
        cc.down_act.push_back(cur);
    }

    for (int j = 0; j < d; ++j) {
        Tensor4<T> in = j == 0 ? cc.down_act[static_cast<size_t>(d - 1)]
                               : concat_channels(cur, cc.down_act[static_cast<size_t>(d - 1 - j)]);
        cc.up_in.push_back(in);
        Tensor4<T> tc = tconv2d_forward(in, up[static_cast<size_t>(j)].w, up[static_cast<size_t>(j)].b, halving);
        cc.up_tconv.push_back(tc);
        Tensor4<T> bn;
        if (mode == Mode::Train) {
            bn = batchnorm_train_forward(tc, up_bn[static_cast<size_t>(j)].gamma, up_bn[static_cast<size_t>(j)].beta,
                                         up_bn[static_cast<size_t>(j)].running_mean,
                                         up_bn[static_cast<size_t>(j)].running_var,
                                         static_cast<T>(kBnMomentum), static_cast<T>(kBnEps),
                                         cc.up_bn[static_cast<size_t>(j)]);
        } else {
            bn = batchnorm_eval_forward(tc, up_bn[static_cast<size_t>(j)].gamma, up_bn[static_cast<size_t>(j)].beta,
                                        up_bn[static_cast<size_t>(j)].running_mean,
                                        up_bn[static_cast<size_t>(j)].running_var, static_cast<T>(kBnEps));
        }
        cur = relu_forward(bn);
        cc.up_act.push_back(cur);
    }

    // dropout sits in the last layer, after every BN
    cc.dropout_on = mode == Mode::Train && spec.dropout_p > 0.0;
    if (cc.dropout_on)
        cur = dropout_forward(cur, spec.dropout_p, dropout_key, cc.dropout_mask);
    cc.head_in = cur;
    cc.x_d1 = conv2d_forward(cur, head.w, head.b, ConvGeom::unit());
    for (auto& v : cc.x_d1.v) v *= static_cast<T>(spec.value_scale);

    // G(x) = x + M .* x_d1, written as a select so unmasked bins stay
    // bit-equal to x
    Tensor4<T> g(x.n, x.c, x.h, x.w);
    for (size_t i = 0; i < g.v.size(); ++i)
        g.v[i] = mask.v[i] != T{} ? x.v[i] + cc.x_d1.v[i] : x.v[i];
    return g;
}

template <typename T>
typename Generator<T>::Grads Generator<T>::zero_grads() const {
    Grads g;
    g.down.resize(down.size());
    g.down_bn.resize(down_bn.size());
    g.up.resize(up.size());
    g.up_bn.resize(up_bn.size());
    for (size_t i = 0; i < down.size(); ++i) {
        g.down[i].w = Tensor4<T>(down[i].w.n, down[i].w.c, down[i].w.h, down[i].w.w);
        g.down[i].b = Tensor4<T>(down[i].b.n, 1, 1, 1);
        g.down_bn[i].gamma = Tensor4<T>(down_bn[i].gamma.n, 1, 1, 1);
        g.down_bn[i].beta = Tensor4<T>(down_bn[i].beta.n, 1, 1, 1);
    }
    for (size_t j = 0; j < up.size(); ++j) {
        g.up[j].w = Tensor4<T>(up[j].w.n, up[j].w.c, up[j].w.h, up[j].w.w);
        g.up[j].b = Tensor4<T>(up[j].b.n, 1, 1, 1);
        g.up_bn[j].gamma = Tensor4<T>(up_bn[j].gamma.n, 1, 1, 1);
        g.up_bn[j].beta = Tensor4<T>(up_bn[j].beta.n, 1, 1, 1);
    }
    g.head.w = Tensor4<T>(head.w.n, head.w.c, head.w.h, head.w.w);
    g.head.b = Tensor4<T>(head.b.n, 1, 1, 1);
    return g;
}

template <typename T>
typename Generator<T>::Grads Generator<T>::backward(const Cache& cc, const Tensor4<T>& dg) const {
    if (cc.mode != Mode::Train) throw validation_error("generator: backward needs a train-mode cache");
    const int d = spec.depth;
    const ConvGeom halving = ConvGeom::halving();
    const T slope = static_cast<T>(spec.leaky_slope);
    Grads grads = zero_grads();

    // through the mask composition and value scaling: only masked bins see
    // x_d1, and the head output carries the value_scale factor
    Tensor4<T> dxd1(dg.n, dg.c, dg.h, dg.w);
    const T scale = static_cast<T>(spec.value_scale);
    for (size_t i = 0; i < dg.v.size(); ++i)
        dxd1.v[i] = cc.mask.v[i] != T{} ? scale * dg.v[i] : T{};

    ConvGrads<T> hg = conv2d_backward(cc.head_in, head.w, dxd1, ConvGeom::unit());
    grads.head.w = hg.dw;
    grads.head.b = hg.db;
    Tensor4<T> cur = hg.dx;
    if (cc.dropout_on) cur = dropout_backward(cc.dropout_mask, cur);

    std::vector<Tensor4<T>> d_down_act(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) {
        const Tensor4<T>& a = cc.down_act[static_cast<size_t>(i)];
        d_down_act[static_cast<size_t>(i)] = Tensor4<T>(a.n, a.c, a.h, a.w);
    }

    for (int j = d - 1; j >= 0; --j) {
        // activation sign survives ReLU, so the cached output works as the
        // backward gate
        Tensor4<T> dbn = relu_backward(cc.up_act[static_cast<size_t>(j)], cur);
        BnGrads<T> bg = batchnorm_train_backward(dbn, up_bn[static_cast<size_t>(j)].gamma,
                                                 cc.up_bn[static_cast<size_t>(j)]);
        grads.up_bn[static_cast<size_t>(j)].gamma = bg.dgamma;
        grads.up_bn[static_cast<size_t>(j)].beta = bg.dbeta;
        ConvGrads<T> tg = tconv2d_backward(cc.up_in[static_cast<size_t>(j)], up[static_cast<size_t>(j)].w,
                                           bg.dx, halving);
        grads.up[static_cast<size_t>(j)].w = tg.dw;
        grads.up[static_cast<size_t>(j)].b = tg.db;
        if (j == 0) {
            Tensor4<T>& acc = d_down_act[static_cast<size_t>(d - 1)];
            for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += tg.dx.v[i];
        } else {
            Tensor4<T> d_prev_up, d_skip;
            split_channels(tg.dx, d_prev_up, d_skip, cc.up_act[static_cast<size_t>(j - 1)].c);
            Tensor4<T>& acc = d_down_act[static_cast<size_t>(d - 1 - j)];
            for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += d_skip.v[i];
            cur = d_prev_up;
        }
    }

    for (int i = d - 1; i >= 0; --i) {
        Tensor4<T> dact = d_down_act[static_cast<size_t>(i)];
        Tensor4<T> dbn = leaky_relu_backward(cc.down_act[static_cast<size_t>(i)], dact, slope);
        BnGrads<T> bg = batchnorm_train_backward(dbn, down_bn[static_cast<size_t>(i)].gamma,
                                                 cc.down_bn[static_cast<size_t>(i)]);
        grads.down_bn[static_cast<size_t>(i)].gamma = bg.dgamma;
        grads.down_bn[static_cast<size_t>(i)].beta = bg.dbeta;
        ConvGrads<T> cg = conv2d_backward(cc.down_in[static_cast<size_t>(i)], down[static_cast<size_t>(i)].w,
                                          bg.dx, halving);
        grads.down[static_cast<size_t>(i)].w = cg.dw;
        grads.down[static_cast<size_t>(i)].b = cg.db;
        if (i > 0) {
            Tensor4<T>& acc = d_down_act[static_cast<size_t>(i - 1)];
            for (size_t k = 0; k < acc.v.size(); ++k) acc.v[k] += cg.dx.v[k];
        }
    }
    return grads;
}

// ---- discriminator --------------------------------------------------------------

template <typename T>
void Discriminator<T>::init(int h, int w, Rng& rng) {
    spec.validate();
    if (h % 2 != 0 || w % 2 != 0) throw validation_error("discriminator: input dims must be even");
    input_h = h;
    input_w = w;
    const int levels = static_cast<int>(spec.widths.size());
    convs.assign(static_cast<size_t>(levels), {});
    bns.assign(static_cast<size_t>(levels), {});
    int ch = h / 2, cw = w / 2;  // after the 2x pool
    int cin = 2;                 // condition + candidate
    for (int i = 0; i < levels; ++i) {
        int cout = spec.widths[static_cast<size_t>(i)];
        init_conv(convs[static_cast<size_t>(i)], cout, cin, 5, 5, rng);
        init_bias(convs[static_cast<size_t>(i)].b, cout);
        init_bn(bns[static_cast<size_t>(i)], cout);
        ConvGeom g = ConvGeom::halving();
        ch = g.out_dim(ch);
        cw = g.out_dim(cw);
        if (ch < 1 || cw < 1) throw validation_error("discriminator: too many levels for this input size");
        cin = cout;
    }
    init_conv(dense, 1, cin * ch * cw, 1, 1, rng);
    init_bias(dense.b, 1);
}

template <typename T>
std::vector<ParamRef<T>> Discriminator<T>::params() {
    std::vector<ParamRef<T>> out;
    for (size_t i = 0; i < convs.size(); ++i) {
        out.push_back({"d.conv" + std::to_string(i) + ".w", &convs[i].w});
        out.push_back({"d.conv" + std::to_string(i) + ".b", &convs[i].b});
        out.push_back({"d.conv" + std::to_string(i) + ".bn.gamma", &bns[i].gamma});
        out.push_back({"d.conv" + std::to_string(i) + ".bn.beta", &bns[i].beta});
    }
    out.push_back({"d.dense.w", &dense.w});
    out.push_back({"d.dense.b", &dense.b});
    return out;
}

template <typename T>
std::vector<ParamRef<T>> Discriminator<T>::state_tensors() {
    std::vector<ParamRef<T>> out;
    for (size_t i = 0; i < bns.size(); ++i) {
        out.push_back({"d.conv" + std::to_string(i) + ".bn.rmean", &bns[i].running_mean});
        out.push_back({"d.conv" + std::to_string(i) + ".bn.rvar", &bns[i].running_var});
    }
    return out;
}

template <typename T>
Tensor4<T> Discriminator<T>::forward(const Tensor4<T>& condition, const Tensor4<T>& candidate, Mode mode,
                                     Cache* cache) {
    if (!condition.same_shape(candidate)) throw validation_error("discriminator: input shape mismatch");
    if (condition.h != input_h || condition.w != input_w)
        throw validation_error("discriminator: input dims do not match the initialized size");
    Cache local;
    Cache& cc = cache ? *cache : local;
    cc.mode = mode;
    cc.conv_in.clear();
    cc.conv_out.clear();
    cc.act_out.clear();
    cc.bn.assign(convs.size(), {});

    cc.pooled = avgpool2_forward(concat_channels(condition, candidate));
    Tensor4<T> cur = cc.pooled;
    const ConvGeom halving = ConvGeom::halving();
    const T slope = static_cast<T>(spec.leaky_slope);
    for (size_t i = 0; i < convs.size(); ++i) {
        cc.conv_in.push_back(cur);
        Tensor4<T> conv = conv2d_forward(cur, convs[i].w, convs[i].b, halving);
        cc.conv_out.push_back(conv);
        Tensor4<T> bn;
        if (mode == Mode::Train) {
            bn = batchnorm_train_forward(conv, bns[i].gamma, bns[i].beta, bns[i].running_mean,
                                         bns[i].running_var, static_cast<T>(kBnMomentum),
                                         static_cast<T>(kBnEps), cc.bn[i]);
        } else {
            bn = batchnorm_eval_forward(conv, bns[i].gamma, bns[i].beta, bns[i].running_mean,
                                        bns[i].running_var, static_cast<T>(kBnEps));
        }
        cur = leaky_relu_forward(bn, slope);
        cc.act_out.push_back(cur);
    }
    cc.dense_in = cur;
    cc.logit = dense_forward(cur, dense.w, dense.b);
    cc.prob = sigmoid_forward(cc.logit);
    return cc.prob;
}

template <typename T>
typename Discriminator<T>::Grads Discriminator<T>::zero_grads() const {
    Grads g;
    g.convs.resize(convs.size());
    g.bns.resize(bns.size());
    for (size_t i = 0; i < convs.size(); ++i) {
        g.convs[i].w = Tensor4<T>(convs[i].w.n, convs[i].w.c, convs[i].w.h, convs[i].w.w);
        g.convs[i].b = Tensor4<T>(convs[i].b.n, 1, 1, 1);
        g.bns[i].gamma = Tensor4<T>(bns[i].gamma.n, 1, 1, 1);
        g.bns[i].beta = Tensor4<T>(bns[i].beta.n, 1, 1, 1);
    }
    g.dense.w = Tensor4<T>(dense.w.n, dense.w.c, 1, 1);
    g.dense.b = Tensor4<T>(dense.b.n, 1, 1, 1);
    return g;
}

template <typename T>
typename Discriminator<T>::Grads Discriminator<T>::backward(const Cache& cc, const Tensor4<T>& dprob,
                                                            Tensor4<T>* d_candidate) const {
    if (cc.mode != Mode::Train) throw validation_error("discriminator: backward needs a train-mode cache");
    Grads grads = zero_grads();
    Tensor4<T> cur = sigmoid_backward(cc.prob, dprob);
    ConvGrads<T> dg = dense_backward(cc.dense_in, dense.w, cur);
    grads.dense.w = dg.dw;
    grads.dense.b = dg.db;
    cur = dg.dx;
    const ConvGeom halving = ConvGeom::halving();
    const T slope = static_cast<T>(spec.leaky_slope);
    for (int i = static_cast<int>(convs.size()) - 1; i >= 0; --i) {
        Tensor4<T> dbn = leaky_relu_backward(cc.act_out[static_cast<size_t>(i)], cur, slope);
        BnGrads<T> bg = batchnorm_train_backward(dbn, bns[static_cast<size_t>(i)].gamma,
                                                 cc.bn[static_cast<size_t>(i)]);
        grads.bns[static_cast<size_t>(i)].gamma = bg.dgamma;
        grads.bns[static_cast<size_t>(i)].beta = bg.dbeta;
        ConvGrads<T> cg = conv2d_backward(cc.conv_in[static_cast<size_t>(i)], convs[static_cast<size_t>(i)].w,
                                          bg.dx, halving);
        grads.convs[static_cast<size_t>(i)].w = cg.dw;
        grads.convs[static_cast<size_t>(i)].b = cg.db;
        cur = cg.dx;
    }
    if (d_candidate) {
        Tensor4<T> d_concat = avgpool2_backward(cur);
        Tensor4<T> d_cond;
        split_channels(d_concat, d_cond, *d_candidate, 1);
    }
    return grads;
}

// ---- Adam ---------------------------------------------------------------------

template <typename T>
void AdamState<T>::init(const std::vector<ParamRef<T>>& params) {
    m.clear();
    v.clear();
    t = 0;
    for (const ParamRef<T>& p : params) {
        m.emplace_back(p.tensor->n, p.tensor->c, p.tensor->h, p.tensor->w);
        v.emplace_back(p.tensor->n, p.tensor->c, p.tensor->h, p.tensor->w);
    }
}

template <typename T>
void adam_step(const std::vector<ParamRef<T>>& params, const std::vector<const Tensor4<T>*>& grads,
               AdamState<T>& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw validation_error("adam: parameter/gradient/state count mismatch");
    state.t += 1;
    const T b1 = state.config.beta1, b2 = state.config.beta2;
    const T corr1 = T(1) - static_cast<T>(std::pow(static_cast<double>(b1), static_cast<double>(state.t)));
    const T corr2 = T(1) - static_cast<T>(std::pow(static_cast<double>(b2), static_cast<double>(state.t)));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor4<T>& p = *params[i].tensor;
        const Tensor4<T>& g = *grads[i];
        if (!p.same_shape(g)) throw validation_error("adam: grad shape mismatch at " + params[i].name);
        check_finite(g, "adam gradient");
        Tensor4<T>& mi = state.m[i];
        Tensor4<T>& vi = state.v[i];
        for (size_t k = 0; k < p.v.size(); ++k) {
            mi.v[k] = b1 * mi.v[k] + (T(1) - b1) * g.v[k];
            vi.v[k] = b2 * vi.v[k] + (T(1) - b2) * g.v[k] * g.v[k];
            T mhat = mi.v[k] / corr1;
            T vhat = vi.v[k] / corr2;
            p.v[k] -= state.config.alpha * mhat / (std::sqrt(vhat) + state.config.eps);
        }
    }
}

template <typename T>
std::vector<const Tensor4<T>*> grad_list(const typename Generator<T>::Grads& g) {
    std::vector<const Tensor4<T>*> out;
    for (size_t i = 0; i < g.down.size(); ++i) {
        out.push_back(&g.down[i].w);
        out.push_back(&g.down[i].b);
        out.push_back(&g.down_bn[i].gamma);
        out.push_back(&g.down_bn[i].beta);
    }
    for (size_t j = 0; j < g.up.size(); ++j) {
        out.push_back(&g.up[j].w);
        out.push_back(&g.up[j].b);
        out.push_back(&g.up_bn[j].gamma);
        out.push_back(&g.up_bn[j].beta);
    }
    out.push_back(&g.head.w);
    out.push_back(&g.head.b);
    return out;
}

template <typename T>
std::vector<const Tensor4<T>*> grad_list(const typename Discriminator<T>::Grads& g) {
    std::vector<const Tensor4<T>*> out;
    for (size_t i = 0; i < g.convs.size(); ++i) {
        out.push_back(&g.convs[i].w);
        out.push_back(&g.convs[i].b);
        out.push_back(&g.bns[i].gamma);
        out.push_back(&g.bns[i].beta);
    }
    out.push_back(&g.dense.w);
    out.push_back(&g.dense.b);
    return out;
}

template struct Generator<float>;
template struct Generator<double>;
template struct Discriminator<float>;
template struct Discriminator<double>;
template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(const std::vector<ParamRef<float>>&, const std::vector<const Tensor4<float>*>&,
                               AdamState<float>&);
template void adam_step<double>(const std::vector<ParamRef<double>>&,
                                const std::vector<const Tensor4<double>*>&, AdamState<double>&);
template std::vector<const Tensor4<float>*> grad_list<float>(const Generator<float>::Grads&);
template std::vector<const Tensor4<double>*> grad_list<double>(const Generator<double>::Grads&);
template std::vector<const Tensor4<float>*> grad_list<float>(const Discriminator<float>::Grads&);
template std::vector<const Tensor4<double>*> grad_list<double>(const Discriminator<double>::Grads&);

}  // namespace ctmar::nn
