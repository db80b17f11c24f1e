#include "qsnn/graph.hpp"

#include <stdexcept>

namespace qsnn {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::StridedConv: return "strided-conv";
        case LayerKind::TransposeConv: return "transpose-conv";
        case LayerKind::MaxPool: return "max-pool";
        case LayerKind::Upsample: return "upsample";
    }
    return "?";
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::None: return "none";
        case Activation::Relu: return "relu";
        case Activation::QRelu: return "qrelu";
    }
    return "?";
}

void check_runnable(const LayerGraph& graph) {
    for (std::size_t i = 0; i < graph.layers.size(); ++i) {
        const LayerKind k = graph.layers[i].kind;
        if (k == LayerKind::MaxPool) {
            throw std::invalid_argument(
                "layer " + std::to_string(i) +
                ": max-pool is not runnable; max-pool must be replaced by strided conv "
                "(down-sampling convolution)");
        }
        if (k == LayerKind::Upsample) {
            throw std::invalid_argument(
                "layer " + std::to_string(i) +
                ": upsample is not runnable; upsample must be replaced by transpose conv");
        }
    }
}

namespace {

ConvKind conv_kind_of(LayerKind k) {
    switch (k) {
        case LayerKind::StridedConv: return ConvKind::StridedConv;
        case LayerKind::TransposeConv: return ConvKind::TransposeConv;
        default: return ConvKind::Conv;
    }
}

} // namespace

ConvSpec effective_conv(const GraphLayer& layer, int weight_bits, bool quantize_weights) {
    ConvSpec spec = layer.conv;
    spec.kind = conv_kind_of(layer.kind);
    if (quantize_weights) {
        const QuantParams wq = calibrate_qparams(spec.kernel, weight_bits);
        spec.kernel = fake_quant(spec.kernel, wq);
        if (spec.bias.size() != 0) {
            // Biases share the weight quantizer during training.
            spec.bias = fake_quant(spec.bias, wq);
        }
    }
    return spec;
}

ForwardTrace forward(const LayerGraph& graph, const Tensor& input, const ForwardOptions& opts) {
    check_runnable(graph);
    if (input.rank() != 4) {
        throw std::invalid_argument("forward: input must be 4-D, got " + input.shape_str());
    }
    if (input.dim(1) != graph.in_channels || input.dim(2) != graph.in_h ||
        input.dim(3) != graph.in_w) {
        throw std::invalid_argument("forward: input " + input.shape_str() +
                                    " does not match graph input (" +
                                    std::to_string(graph.in_channels) + "," +
                                    std::to_string(graph.in_h) + "," +
                                    std::to_string(graph.in_w) + ")");
    }

    ForwardTrace trace;
    trace.pre.reserve(graph.layers.size());
    trace.post.reserve(graph.layers.size());
    Tensor x = input;
    for (const GraphLayer& layer : graph.layers) {
        const ConvSpec spec = effective_conv(layer, graph.weight_bits, opts.quantize_weights);
        Tensor pre = layer.kind == LayerKind::TransposeConv ? transpose_conv2d(x, spec)
                                                            : conv2d(x, spec);
        if (layer.has_bn) pre = apply_batchnorm(pre, layer.bn);
        Tensor post;
        switch (layer.act) {
            case Activation::None: post = pre; break;
            case Activation::Relu: post = relu(pre); break;
            case Activation::QRelu: {
                if (opts.quantize_activations) {
                    const QuantParams aq = qparams_for_ceiling(layer.qrelu_ceiling, layer.act_bits);
                    post = qrelu(pre, aq, layer.qrelu_ceiling);
                } else {
                    // Quantization disabled: QReLU degrades to its clamp.
                    post = pre;
                    for (double& v : post.real()) v = std::clamp(v, 0.0, layer.qrelu_ceiling);
                }
                break;
            }
        }
        trace.pre.push_back(std::move(pre));
        trace.post.push_back(post);
        x = std::move(post);
    }
    return trace;
}

Tensor forward_output(const LayerGraph& graph, const Tensor& input, const ForwardOptions& opts) {
    ForwardTrace trace = forward(graph, input, opts);
    if (trace.post.empty()) {
        throw std::invalid_argument("forward: graph has no layers");
    }
    return trace.post.back();
}

} // namespace qsnn
