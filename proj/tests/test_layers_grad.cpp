#include <cmath>
#include <functional>

#include "ctmar/train.hpp"
#include "doctest.h"

// Central finite-difference checks (step 1e-3, 64-bit) for every layer's
// input and parameter gradients, then end-to-end for the CGAN losses.

using namespace ctmar;
using namespace ctmar::nn;

namespace {

constexpr double kStep = 1e-3;
constexpr double kTol = 1e-3;

using T4 = Tensor4<double>;

T4 random_tensor(int n, int c, int h, int w, Rng& rng, double lo = -1.0, double hi = 1.0) {
    T4 t(n, c, h, w);
    for (auto& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

// fixed random projection turns a tensor-valued forward into a scalar loss
struct Projection {
    std::vector<double> w;
    explicit Projection(size_t n, Rng& rng) {
        w.resize(n);
        for (auto& x : w) x = rng.uniform(-1.0, 1.0);
    }
    double operator()(const T4& t) const {
        double acc = 0.0;
        for (size_t i = 0; i < t.v.size(); ++i) acc += w[i] * t.v[i];
        return acc;
    }
    T4 upstream(const T4& like) const {
        T4 g(like.n, like.c, like.h, like.w);
        for (size_t i = 0; i < g.v.size(); ++i) g.v[i] = w[i];
        return g;
    }
};

double rel_err(double a, double f) {
    return std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-3});
}

// max relative error between an analytic gradient tensor and central
// differences of `loss` w.r.t. `param`
double fd_check(T4& param, const T4& analytic, const std::function<double()>& loss) {
    double worst = 0.0;
    for (size_t i = 0; i < param.v.size(); ++i) {
        double orig = param.v[i];
        param.v[i] = orig + kStep;
        double up = loss();
        param.v[i] = orig - kStep;
        double down = loss();
        param.v[i] = orig;
        worst = std::max(worst, rel_err(analytic.v[i], (up - down) / (2.0 * kStep)));
    }
    return worst;
}

}  // namespace

TEST_CASE("conv 1x1 identity kernel passes input through") {
    Tensor4<float> x(1, 1, 4, 4);
    for (size_t i = 0; i < x.v.size(); ++i) x.v[i] = static_cast<float>(i) * 0.5f;
    Tensor4<float> w(1, 1, 1, 1, 1.0f);
    Tensor4<float> b(1, 1, 1, 1, 0.0f);
    Tensor4<float> y = conv2d_forward(x, w, b, ConvGeom::unit());
    CHECK(y.v == x.v);
}

TEST_CASE("leaky relu values") {
    Tensor4<float> x(1, 1, 1, 2);
    x.v = {-1.0f, 2.0f};
    Tensor4<float> y = leaky_relu_forward(x, 0.2f);
    CHECK(y.v[0] == doctest::Approx(-0.2f));
    CHECK(y.v[1] == doctest::Approx(2.0f));
}

TEST_CASE("conv gradients match finite differences") {
    Rng rng(1);
    T4 x = random_tensor(2, 3, 8, 8, rng);
    T4 w = random_tensor(4, 3, 5, 5, rng, -0.3, 0.3);
    T4 b = random_tensor(4, 1, 1, 1, rng, -0.2, 0.2);
    ConvGeom geom = ConvGeom::halving();
    Projection proj(static_cast<size_t>(2 * 4 * 4 * 4), rng);

    auto loss = [&] { return proj(conv2d_forward(x, w, b, geom)); };
    ConvGrads<double> g = conv2d_backward(x, w, proj.upstream(conv2d_forward(x, w, b, geom)), geom);
    CHECK(fd_check(w, g.dw, loss) < kTol);
    CHECK(fd_check(b, g.db, loss) < kTol);
    CHECK(fd_check(x, g.dx, loss) < kTol);
}

TEST_CASE("transposed conv gradients match finite differences") {
    Rng rng(2);
    T4 x = random_tensor(2, 3, 8, 8, rng);
    T4 w = random_tensor(3, 2, 5, 5, rng, -0.3, 0.3);  // (c_in, c_out, kh, kw)
    T4 b = random_tensor(2, 1, 1, 1, rng, -0.2, 0.2);
    ConvGeom geom = ConvGeom::halving();
    Projection proj(static_cast<size_t>(2 * 2 * 16 * 16), rng);

    auto loss = [&] { return proj(tconv2d_forward(x, w, b, geom)); };
    ConvGrads<double> g = tconv2d_backward(x, w, proj.upstream(tconv2d_forward(x, w, b, geom)), geom);
    CHECK(fd_check(w, g.dw, loss) < kTol);
    CHECK(fd_check(b, g.db, loss) < kTol);
    CHECK(fd_check(x, g.dx, loss) < kTol);
}

TEST_CASE("batch norm (train) gradients match finite differences") {
    Rng rng(3);
    T4 x = random_tensor(2, 3, 8, 8, rng);
    T4 gamma = random_tensor(3, 1, 1, 1, rng, 0.5, 1.5);
    T4 beta = random_tensor(3, 1, 1, 1, rng, -0.5, 0.5);
    Projection proj(static_cast<size_t>(2 * 3 * 8 * 8), rng);
    const double eps = 1e-5;

    auto loss = [&] {
        T4 rm(3, 1, 1, 1), rv(3, 1, 1, 1, 1.0);
        BnCache<double> cache;
        return proj(batchnorm_train_forward(x, gamma, beta, rm, rv, 0.9, eps, cache));
    };
    T4 rm(3, 1, 1, 1), rv(3, 1, 1, 1, 1.0);
    BnCache<double> cache;
    T4 y = batchnorm_train_forward(x, gamma, beta, rm, rv, 0.9, eps, cache);
    BnGrads<double> g = batchnorm_train_backward(proj.upstream(y), gamma, cache);
    CHECK(fd_check(gamma, g.dgamma, loss) < kTol);
    CHECK(fd_check(beta, g.dbeta, loss) < kTol);
    CHECK(fd_check(x, g.dx, loss) < kTol);
}

TEST_CASE("activation gradients match finite differences") {
    Rng rng(4);
    T4 x = random_tensor(2, 3, 8, 8, rng);
    Projection proj(x.v.size(), rng);

    SUBCASE("leaky relu") {
        auto loss = [&] { return proj(leaky_relu_forward(x, 0.2)); };
        T4 dx = leaky_relu_backward(x, proj.upstream(x), 0.2);
        CHECK(fd_check(x, dx, loss) < kTol);
    }
    SUBCASE("relu") {
        auto loss = [&] { return proj(relu_forward(x)); };
        T4 dx = relu_backward(x, proj.upstream(x));
        CHECK(fd_check(x, dx, loss) < kTol);
    }
    SUBCASE("sigmoid") {
        auto loss = [&] { return proj(sigmoid_forward(x)); };
        T4 dx = sigmoid_backward(sigmoid_forward(x), proj.upstream(x));
        CHECK(fd_check(x, dx, loss) < kTol);
    }
}

TEST_CASE("dropout gradient matches finite differences for a fixed key") {
    Rng rng(5);
    T4 x = random_tensor(2, 3, 8, 8, rng);
    Projection proj(x.v.size(), rng);
    const std::uint64_t key = 77;
    auto loss = [&] {
        T4 mask;
        return proj(dropout_forward(x, 0.5, key, mask));
    };
    T4 mask;
    dropout_forward(x, 0.5, key, mask);
    T4 dx = dropout_backward(mask, proj.upstream(x));
    CHECK(fd_check(x, dx, loss) < kTol);
}

TEST_CASE("avg pool gradient matches finite differences") {
    Rng rng(6);
    T4 x = random_tensor(2, 3, 8, 8, rng);
    Projection proj(static_cast<size_t>(2 * 3 * 4 * 4), rng);
    auto loss = [&] { return proj(avgpool2_forward(x)); };
    T4 dx = avgpool2_backward(proj.upstream(avgpool2_forward(x)));
    CHECK(fd_check(x, dx, loss) < kTol);
}

TEST_CASE("concat gradients flow to both inputs") {
    Rng rng(7);
    T4 a = random_tensor(2, 2, 8, 8, rng);
    T4 b = random_tensor(2, 3, 8, 8, rng);
    Projection proj(static_cast<size_t>(2 * 5 * 8 * 8), rng);
    auto loss = [&] { return proj(concat_channels(a, b)); };
    T4 da, db;
    split_channels(proj.upstream(concat_channels(a, b)), da, db, 2);
    CHECK(fd_check(a, da, loss) < kTol);
    CHECK(fd_check(b, db, loss) < kTol);
}

TEST_CASE("dense gradients match finite differences") {
    Rng rng(8);
    T4 x = random_tensor(2, 3, 4, 4, rng);
    T4 w = random_tensor(5, 48, 1, 1, rng, -0.3, 0.3);
    T4 b = random_tensor(5, 1, 1, 1, rng);
    Projection proj(static_cast<size_t>(2 * 5), rng);
    auto loss = [&] { return proj(dense_forward(x, w, b)); };
    ConvGrads<double> g = dense_backward(x, w, proj.upstream(dense_forward(x, w, b)));
    CHECK(fd_check(w, g.dw, loss) < kTol);
    CHECK(fd_check(b, g.db, loss) < kTol);
    CHECK(fd_check(x, g.dx, loss) < kTol);
}

namespace {

// Fresh inits carry sigma-0.02 weights; at that scale a 1e-3 FD step is a
// huge relative perturbation, batch-norm curvature swamps the quadrature,
// and near-zero activations cross the ReLU kink inside the difference
// interval. The end-to-end checks therefore run at a conditioned test point:
// O(1) conv weights (the BN-free head and dense layers keep their natural
// scale) and BN gamma/beta in [1, 2] so activations sit far from the kinks.
template <typename Net>
void condition_net(Net& net, Rng& rng) {
    for (auto& p : net.params()) {
        if (p.name.ends_with(".w") && p.name.find("head") == std::string::npos &&
            p.name.find("dense") == std::string::npos)
            for (auto& v : p.tensor->v) v *= 100.0;
        if (p.name.find("dense.w") != std::string::npos)
            for (auto& v : p.tensor->v) v *= 10.0;
        if (p.name.ends_with("gamma") || p.name.ends_with("beta"))
            for (auto& v : p.tensor->v) v = rng.uniform(1.0, 2.0);
    }
}

Batch<double> micro_batch(Rng& rng, int h = 8, int w = 8) {
    Batch<double> b;
    b.x = random_tensor(2, 1, h, w, rng, 0.0, 2.0);
    b.y = b.x;
    b.mask = T4(2, 1, h, w);
    for (size_t i = 0; i < b.mask.v.size(); ++i) b.mask.v[i] = rng.uniform() < 0.3 ? 1.0 : 0.0;
    for (size_t i = 0; i < b.x.v.size(); ++i)
        if (b.mask.v[i] != 0.0) {
            b.x.v[i] = 0.0;                 // deleted bins
            b.y.v[i] = rng.uniform(0.0, 2.0);  // reference carries structure there
        }
    return b;
}

}  // namespace

TEST_CASE("end-to-end generator loss gradients match finite differences") {
    // seed picked so no activation sits within the FD step of a ReLU kink and
    // the discriminator stays unsaturated; per-layer checks above cover the
    // individual kernels at independent seeds
    Rng rng(37);
    Generator<double> g;
    g.spec.depth = 2;
    g.spec.widths = {3, 4};
    g.init(rng);
    condition_net(g, rng);
    Discriminator<double> d;
    d.spec.widths = {3, 4};
    d.init(8, 8, rng);
    condition_net(d, rng);
    Batch<double> batch = micro_batch(rng);
    const double lambda = 10.0;
    const std::uint64_t key = 1234;

    for (AdvVariant variant : {AdvVariant::NonSaturating, AdvVariant::MinimaxLiteral}) {
        GStepOut<double> out = g_step_grads(batch, g, d, lambda, variant, key);
        auto loss = [&] {
            LossParts<double> parts = cgan_losses(batch, g, d, lambda, variant, key);
            return parts.loss_g;
        };
        std::vector<ParamRef<double>> params = g.params();
        std::vector<const T4*> grads = grad_list<double>(out.grads);
        REQUIRE(params.size() == grads.size());
        double worst = 0.0;
        for (size_t p = 0; p < params.size(); ++p)
            worst = std::max(worst, fd_check(*params[p].tensor, *grads[p], loss));
        CHECK(worst < kTol);
    }
}

TEST_CASE("end-to-end discriminator loss gradients match finite differences") {
    Rng rng(37);
    Generator<double> g;
    g.spec.depth = 2;
    g.spec.widths = {3, 4};
    g.init(rng);
    condition_net(g, rng);
    Discriminator<double> d;
    d.spec.widths = {3, 4};
    d.init(8, 8, rng);
    condition_net(d, rng);
    Batch<double> batch = micro_batch(rng);
    const std::uint64_t key = 99;

    DStepOut<double> out = d_step_grads(batch, g, d, key);
    auto loss = [&] {
        LossParts<double> parts = cgan_losses(batch, g, d, 10.0, AdvVariant::NonSaturating, key);
        return parts.loss_d;
    };
    std::vector<ParamRef<double>> params = d.params();
    std::vector<const T4*> grads = grad_list<double>(out.grads);
    REQUIRE(params.size() == grads.size());
    double worst = 0.0;
    for (size_t p = 0; p < params.size(); ++p)
        worst = std::max(worst, fd_check(*params[p].tensor, *grads[p], loss));
    CHECK(worst < kTol);
}
