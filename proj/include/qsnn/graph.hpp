#ifndef QSNN_GRAPH_HPP
#define QSNN_GRAPH_HPP

#include "qsnn/conv.hpp"
#include "qsnn/quant.hpp"
#include "qsnn/tensor.hpp"

#include <string>
#include <vector>

namespace qsnn {

enum class Activation : std::uint8_t { None, Relu, QRelu };

/// Layer kinds a graph description may carry. MaxPool and Upsample exist so
/// imported architectures can be validated and rejected with the required
/// substitution; they are never runnable here.
enum class LayerKind : std::uint8_t { Conv, StridedConv, TransposeConv, MaxPool, Upsample };

const char* layer_kind_name(LayerKind k);
const char* activation_name(Activation a);

struct GraphLayer {
    LayerKind kind = LayerKind::Conv;
    ConvSpec conv;              // valid for conv kinds
    bool has_bn = false;        // BN applied between conv and activation
    BatchNormSpec bn;
    Activation act = Activation::Relu;
    double qrelu_ceiling = 1.0;
    int act_bits = 8;
};

/// Ordered feed-forward conv network, the ANN side of the toolchain.
struct LayerGraph {
    int in_channels = 1;
    int in_h = 8;
    int in_w = 8;
    int weight_bits = 8; // fake-quant width for weights during training
    std::vector<GraphLayer> layers;
};

struct ForwardOptions {
    bool quantize_weights = false;   // fake-quant weights per layer before use
    bool quantize_activations = true; // QReLU layers apply their grid; Relu stays plain
};

/// Activations recorded by a forward pass: pre[l] is the conv(+BN) output of
/// layer l, post[l] the post-activation output. post.back() is the network
/// output.
struct ForwardTrace {
    std::vector<Tensor> pre;
    std::vector<Tensor> post;
};

void check_runnable(const LayerGraph& graph);

/// Run the graph on a (1, C, H, W) input. Throws on non-runnable layers.
ForwardTrace forward(const LayerGraph& graph, const Tensor& input,
                     const ForwardOptions& opts = {});

Tensor forward_output(const LayerGraph& graph, const Tensor& input,
                      const ForwardOptions& opts = {});

/// Per-layer weights after the training-time weight fake-quant.
ConvSpec effective_conv(const GraphLayer& layer, int weight_bits, bool quantize_weights);

} // namespace qsnn

#endif
