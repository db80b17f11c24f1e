#ifndef QSNN_QAT_HPP
#define QSNN_QAT_HPP

#include "qsnn/graph.hpp"
#include "qsnn/synthetic.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace qsnn {

struct TrainConfig {
    double learning_rate = 0.05;
    int steps = 500;
    int batch_size = 8;
    std::uint64_t seed = 1;
    int weight_bits = 8;
    int activation_bits = 8;
};

/// Straight-through estimator through quantize-dequantize: the upstream
/// gradient passes where |x| is inside the non-saturated range, else 0.
double ste_grad_fake_quant(double x, const QuantParams& qp, double upstream);

struct Gradients {
    std::vector<Tensor> weights;            // same shapes as layer kernels
    std::vector<std::vector<double>> bias;  // per layer, per out-channel
};

struct LossGrads {
    double loss = 0.0;
    Gradients grads;
};

/// Mean-squared-error loss of the graph on a batch, averaged over samples
/// and output elements.
double qat_loss(const LayerGraph& graph, std::span<const BlobSample> batch,
                const ForwardOptions& opts);

/// Loss plus gradients w.r.t. raw weights and biases (STE through the
/// quantizers when opts.quantize_* are set).
LossGrads qat_loss_and_grads(const LayerGraph& graph, std::span<const BlobSample> batch,
                             const ForwardOptions& opts);

/// He-style deterministic weight init; biases start at zero.
void init_graph_weights(LayerGraph& graph, std::uint64_t seed);

struct TrainResult {
    LayerGraph graph;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

/// Plain-SGD fake-quant training loop on the synthetic task. Bit-reproducible
/// for a given (graph, task, cfg). Rejects graphs with unfolded BN or
/// non-conv layers before touching any weights.
TrainResult train_toy(const LayerGraph& graph, const BlobTask& task, const TrainConfig& cfg);

} // namespace qsnn

#endif
