#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qsnn/qat.hpp"
#include "test_util.hpp"

#include <stdexcept>

using namespace qsnn;
using namespace qsnn::test;

namespace {

GraphLayer conv_layer(LayerKind kind, int out_c, int in_c, int k, int stride, int pad,
                      Activation act, Rng& rng) {
    GraphLayer layer;
    layer.kind = kind;
    layer.conv.kernel = rand_real(rng, {out_c, in_c, k, k}, -0.5, 0.5);
    layer.conv.bias = rand_real(rng, {out_c}, -0.1, 0.1);
    layer.conv.stride = stride;
    layer.conv.padding = pad;
    layer.act = act;
    return layer;
}

// 8x8 single-channel net exercising all three conv kinds.
LayerGraph small_graph(Rng& rng, Activation hidden_act) {
    LayerGraph g;
    g.in_channels = 1;
    g.in_h = 8;
    g.in_w = 8;
    g.layers.push_back(conv_layer(LayerKind::Conv, 2, 1, 3, 1, 1, hidden_act, rng));
    g.layers.push_back(conv_layer(LayerKind::StridedConv, 3, 2, 3, 2, 1, hidden_act, rng));
    g.layers.push_back(conv_layer(LayerKind::TransposeConv, 2, 3, 2, 2, 0, hidden_act, rng));
    g.layers.push_back(conv_layer(LayerKind::Conv, 2, 2, 8, 1, 0, Activation::None, rng));
    return g;
}

std::vector<BlobSample> small_batch(const BlobTask& task, int n, std::uint64_t base) {
    std::vector<BlobSample> batch;
    for (int i = 0; i < n; ++i) batch.push_back(task.sample(base + i));
    return batch;
}

} // namespace

TEST_CASE("ste_grad_fake_quant passes inside the range, zeroes outside") {
    QuantParams qp{8, 0.01}; // range 1.27
    CHECK(ste_grad_fake_quant(0.5, qp, 1.0) == 1.0);
    CHECK(ste_grad_fake_quant(-1.27, qp, 0.25) == 0.25);
    CHECK(ste_grad_fake_quant(1.5, qp, 1.0) == 0.0);
    CHECK(ste_grad_fake_quant(-2.0, qp, -3.0) == 0.0);
}

TEST_CASE("backprop matches central finite differences") {
    // fake_quant treated as identity on both paths; QReLU contributes its
    // clamp mask, which is what the STE reduces to in-range.
    for (std::uint64_t seed : {101u, 202u, 303u}) {
        Rng rng(seed);
        const Activation act = seed % 2 ? Activation::Relu : Activation::QRelu;
        LayerGraph g = small_graph(rng, act);
        for (GraphLayer& l : g.layers) l.qrelu_ceiling = 2.0;

        BlobTask task(1, 8, 8, seed);
        const std::vector<BlobSample> batch = small_batch(task, 2, 50);

        ForwardOptions opts;
        opts.quantize_weights = false;
        opts.quantize_activations = false;

        const LossGrads lg = qat_loss_and_grads(g, batch, opts);

        const double h = 1e-6;
        for (std::size_t l = 0; l < g.layers.size(); ++l) {
            auto w = g.layers[l].conv.kernel.real();
            // probe a handful of weights per layer
            for (std::size_t i = 0; i < w.size(); i += std::max<std::size_t>(1, w.size() / 7)) {
                const double saved = w[i];
                w[i] = saved + h;
                const double up = qat_loss(g, batch, opts);
                w[i] = saved - h;
                const double down = qat_loss(g, batch, opts);
                w[i] = saved;
                const double numeric = (up - down) / (2 * h);
                const double analytic = lg.grads.weights[l].real()[i];
                CHECK(std::fabs(analytic - numeric) <=
                      1e-4 * std::max({std::fabs(analytic), std::fabs(numeric), 1e-3}));
            }
            auto b = g.layers[l].conv.bias.real();
            for (std::size_t c = 0; c < b.size(); ++c) {
                const double saved = b[c];
                b[c] = saved + h;
                const double up = qat_loss(g, batch, opts);
                b[c] = saved - h;
                const double down = qat_loss(g, batch, opts);
                b[c] = saved;
                const double numeric = (up - down) / (2 * h);
                const double analytic = lg.grads.bias[l][c];
                CHECK(std::fabs(analytic - numeric) <=
                      1e-4 * std::max({std::fabs(analytic), std::fabs(numeric), 1e-3}));
            }
        }
    }
}

TEST_CASE("quantized-path gradients are zero exactly where saturation clips") {
    Rng rng(7);
    LayerGraph g;
    g.in_channels = 1;
    g.in_h = 4;
    g.in_w = 4;
    g.layers.push_back(conv_layer(LayerKind::Conv, 2, 1, 4, 1, 0, Activation::None, rng));
    g.weight_bits = 8;

    BlobTask task(1, 4, 4, 99);
    const std::vector<BlobSample> batch = small_batch(task, 1, 0);

    ForwardOptions opts;
    opts.quantize_weights = true;
    const LossGrads lg = qat_loss_and_grads(g, batch, opts);
    // Per-forward calibration puts every weight inside the range, so no
    // gradient is masked.
    double nonzero = 0;
    for (double v : lg.grads.weights[0].real()) nonzero += std::fabs(v);
    CHECK(nonzero > 0.0);
}

TEST_CASE("train_toy reduces the loss and is reproducible") {
    Rng rng(55);
    LayerGraph g;
    g.in_channels = 1;
    g.in_h = 8;
    g.in_w = 8;
    g.layers.push_back(conv_layer(LayerKind::Conv, 4, 1, 3, 1, 1, Activation::QRelu, rng));
    g.layers.push_back(conv_layer(LayerKind::StridedConv, 8, 4, 3, 2, 1, Activation::QRelu, rng));
    g.layers.push_back(conv_layer(LayerKind::Conv, 2, 8, 4, 1, 0, Activation::None, rng));
    init_graph_weights(g, 321);

    BlobTask task(1, 8, 8, 123);
    TrainConfig cfg;
    cfg.learning_rate = 0.2;
    cfg.steps = 500;
    cfg.batch_size = 8;
    cfg.seed = 42;
    cfg.weight_bits = 8;
    cfg.activation_bits = 8;

    const TrainResult r1 = train_toy(g, task, cfg);
    CHECK(r1.final_loss < r1.initial_loss);
    CHECK(r1.initial_loss / r1.final_loss >= 5.0);

    SUBCASE("same seed is bit-identical") {
        const TrainResult r2 = train_toy(g, task, cfg);
        CHECK(r2.final_loss == r1.final_loss);
        for (std::size_t l = 0; l < r1.graph.layers.size(); ++l) {
            auto a = r1.graph.layers[l].conv.kernel.real();
            auto b = r2.graph.layers[l].conv.kernel.real();
            for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
        }
    }

    SUBCASE("zero learning rate leaves weights untouched") {
        TrainConfig frozen = cfg;
        frozen.learning_rate = 0.0;
        frozen.steps = 5;
        const TrainResult r = train_toy(g, task, frozen);
        for (std::size_t l = 0; l < g.layers.size(); ++l) {
            auto a = g.layers[l].conv.kernel.real();
            auto b = r.graph.layers[l].conv.kernel.real();
            for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
        }
    }

    SUBCASE("trained weights sit within a fake-quant step") {
        for (const GraphLayer& layer : r1.graph.layers) {
            const QuantParams wq = calibrate_qparams(layer.conv.kernel, cfg.weight_bits);
            const Tensor fq = fake_quant(layer.conv.kernel, wq);
            CHECK(max_abs_diff(fq, layer.conv.kernel) <= wq.scale / 2 + 1e-15);
        }
    }
}

TEST_CASE("train_toy rejects unsupported graphs before training") {
    Rng rng(77);
    BlobTask task(1, 8, 8, 1);
    TrainConfig cfg;

    SUBCASE("max-pool") {
        LayerGraph g;
        GraphLayer pool;
        pool.kind = LayerKind::MaxPool;
        g.layers.push_back(pool);
        CHECK_THROWS_WITH_AS(train_toy(g, task, cfg), doctest::Contains("strided conv"),
                             std::invalid_argument);
    }
    SUBCASE("unfolded batch norm") {
        LayerGraph g;
        GraphLayer layer = conv_layer(LayerKind::Conv, 1, 1, 3, 1, 1, Activation::Relu, rng);
        layer.has_bn = true;
        layer.bn = {{1.0}, {0.0}, {0.0}, {1.0}, 1e-5};
        g.layers.push_back(layer);
        CHECK_THROWS_WITH_AS(train_toy(g, task, cfg), doctest::Contains("fold"),
                             std::invalid_argument);
    }
}
