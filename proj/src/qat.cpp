#include "qsnn/qat.hpp"

#include "qsnn/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace qsnn {

double ste_grad_fake_quant(double x, const QuantParams& qp, double upstream) {
    return std::fabs(x) <= qp.range() ? upstream : 0.0;
}

namespace {

void check_trainable(const LayerGraph& graph) {
    check_runnable(graph);
    for (std::size_t i = 0; i < graph.layers.size(); ++i) {
        if (graph.layers[i].has_bn) {
            throw std::invalid_argument("layer " + std::to_string(i) +
                                        ": batch norm must be folded before training "
                                        "(fold_batchnorm)");
        }
    }
    if (graph.layers.empty()) {
        throw std::invalid_argument("train: graph has no layers");
    }
}

// dL/d(pre-activation) from dL/d(post-activation), by layer activation rule.
Tensor activation_backward(const GraphLayer& layer, const Tensor& pre, const Tensor& grad_post) {
    Tensor grad = grad_post;
    auto g = grad.real();
    auto p = pre.real();
    switch (layer.act) {
        case Activation::None:
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (p[i] <= 0.0) g[i] = 0.0;
            }
            break;
        case Activation::QRelu:
            // STE through the clamp+grid: pass inside [0, ceiling].
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (p[i] < 0.0 || p[i] > layer.qrelu_ceiling) g[i] = 0.0;
            }
            break;
    }
    return grad;
}

struct LayerCache {
    Tensor input;       // x_{l-1}
    Tensor pre;         // conv(+bias) output
    ConvSpec eff;       // weights actually used (possibly fake-quantized)
    QuantParams wq;     // quantizer applied to weights, if any
};

// grad_w and grad_b of a conv layer given upstream dL/d(pre).
void conv_weight_grads(const GraphLayer& layer, const LayerCache& cache, const Tensor& grad_pre,
                       Tensor& grad_w, std::vector<double>& grad_b) {
    const ConvSpec& spec = layer.conv;
    const Tensor& x = cache.input;
    const int in_c = spec.in_channels(), out_c = spec.out_channels();
    const int k_h = spec.kernel_h(), k_w = spec.kernel_w();
    const int stride = spec.stride, pad = spec.padding;
    auto gw = grad_w.real();
    auto gp = grad_pre.real();
    auto xd = x.real();

    const bool transpose = layer.kind == LayerKind::TransposeConv;
    const Tensor& small = transpose ? x : grad_pre;           // indexed by (iy, ix)
    const Tensor& large = transpose ? grad_pre : x;           // indexed by (iy*s+ky-p, ...)
    const int s_h = small.dim(2), s_w = small.dim(3);
    const int l_h = large.dim(2), l_w = large.dim(3);

    for (int n = 0; n < grad_pre.dim(0); ++n) {
        for (int co = 0; co < out_c; ++co) {
            double bsum = 0.0;
            for (int oy = 0; oy < grad_pre.dim(2); ++oy) {
                for (int ox = 0; ox < grad_pre.dim(3); ++ox) {
                    bsum += gp[grad_pre.index(n, co, oy, ox)];
                }
            }
            grad_b[co] += bsum;
            for (int ci = 0; ci < in_c; ++ci) {
                for (int ky = 0; ky < k_h; ++ky) {
                    for (int kx = 0; kx < k_w; ++kx) {
                        double sum = 0.0;
                        for (int sy = 0; sy < s_h; ++sy) {
                            const int ly = sy * stride + ky - pad;
                            if (ly < 0 || ly >= l_h) continue;
                            for (int sx = 0; sx < s_w; ++sx) {
                                const int lx = sx * stride + kx - pad;
                                if (lx < 0 || lx >= l_w) continue;
                                if (transpose) {
                                    sum += xd[x.index(n, ci, sy, sx)] *
                                           gp[grad_pre.index(n, co, ly, lx)];
                                } else {
                                    sum += gp[grad_pre.index(n, co, sy, sx)] *
                                           xd[x.index(n, ci, ly, lx)];
                                }
                            }
                        }
                        gw[grad_w.index(co, ci, ky, kx)] += sum;
                    }
                }
            }
        }
    }
}

// Kernel with the channel axes swapped: (out, in, kh, kw) -> (in, out, kh, kw).
// The adjoint maps gradients from out-channels back to in-channels.
Tensor swap_channel_axes(const Tensor& k) {
    const int out_c = k.dim(0), in_c = k.dim(1), kh = k.dim(2), kw = k.dim(3);
    Tensor swapped = Tensor::zeros({in_c, out_c, kh, kw});
    auto s = swapped.real();
    auto src = k.real();
    for (int co = 0; co < out_c; ++co) {
        for (int ci = 0; ci < in_c; ++ci) {
            for (int y = 0; y < kh; ++y) {
                for (int x = 0; x < kw; ++x) {
                    s[swapped.index(ci, co, y, x)] = src[k.index(co, ci, y, x)];
                }
            }
        }
    }
    return swapped;
}

Tensor conv_input_grad(const GraphLayer& layer, const LayerCache& cache, const Tensor& grad_pre) {
    if (layer.kind == LayerKind::TransposeConv) {
        // The adjoint of the scatter is a plain conv with channels swapped;
        // its output size always matches the transpose-conv input exactly.
        ConvSpec adj = cache.eff;
        adj.kind = ConvKind::Conv;
        adj.kernel = swap_channel_axes(cache.eff.kernel);
        adj.bias = Tensor();
        return conv2d(grad_pre, adj);
    }
    // Conv adjoint, scattered straight into the input shape. Going through
    // transpose_conv2d would drop trailing rows whenever the stride does not
    // tile the input exactly.
    const ConvSpec& spec = cache.eff;
    const Tensor& k = spec.kernel;
    Tensor out = Tensor::zeros(cache.input.shape());
    auto o = out.real();
    auto gp = grad_pre.real();
    auto kd = k.real();
    const int in_h = out.dim(2), in_w = out.dim(3);
    for (int n = 0; n < grad_pre.dim(0); ++n) {
        for (int co = 0; co < k.dim(0); ++co) {
            for (int oy = 0; oy < grad_pre.dim(2); ++oy) {
                for (int ox = 0; ox < grad_pre.dim(3); ++ox) {
                    const double g = gp[grad_pre.index(n, co, oy, ox)];
                    if (g == 0.0) continue;
                    for (int ci = 0; ci < k.dim(1); ++ci) {
                        for (int ky = 0; ky < k.dim(2); ++ky) {
                            const int iy = oy * spec.stride + ky - spec.padding;
                            if (iy < 0 || iy >= in_h) continue;
                            for (int kx = 0; kx < k.dim(3); ++kx) {
                                const int ix = ox * spec.stride + kx - spec.padding;
                                if (ix < 0 || ix >= in_w) continue;
                                o[out.index(n, ci, iy, ix)] += g * kd[k.index(co, ci, ky, kx)];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

} // namespace

double qat_loss(const LayerGraph& graph, std::span<const BlobSample> batch,
                const ForwardOptions& opts) {
    double total = 0.0;
    std::size_t count = 0;
    for (const BlobSample& sample : batch) {
        const Tensor y = forward_output(graph, sample.image, opts);
        auto yd = y.real();
        if (yd.size() != sample.target.size()) {
            throw std::invalid_argument("loss: output size " + std::to_string(yd.size()) +
                                        " does not match target size " +
                                        std::to_string(sample.target.size()));
        }
        for (std::size_t k = 0; k < yd.size(); ++k) {
            const double d = yd[k] - sample.target[k];
            total += d * d;
        }
        count += yd.size();
    }
    return total / static_cast<double>(count);
}

LossGrads qat_loss_and_grads(const LayerGraph& graph, std::span<const BlobSample> batch,
                             const ForwardOptions& opts) {
    check_trainable(graph);
    LossGrads out;
    out.grads.weights.reserve(graph.layers.size());
    out.grads.bias.reserve(graph.layers.size());
    for (const GraphLayer& layer : graph.layers) {
        out.grads.weights.push_back(Tensor::zeros(layer.conv.kernel.shape()));
        out.grads.bias.emplace_back(layer.conv.out_channels(), 0.0);
    }

    std::size_t elem_count = 0;
    for (const BlobSample& sample : batch) {
        // Forward with caches.
        std::vector<LayerCache> caches;
        caches.reserve(graph.layers.size());
        Tensor x = sample.image;
        for (const GraphLayer& layer : graph.layers) {
            LayerCache cache;
            cache.input = x;
            cache.wq = calibrate_qparams(layer.conv.kernel, graph.weight_bits);
            cache.eff = effective_conv(layer, graph.weight_bits, opts.quantize_weights);
            cache.pre = layer.kind == LayerKind::TransposeConv
                            ? transpose_conv2d(x, cache.eff)
                            : conv2d(x, cache.eff);
            Tensor post;
            switch (layer.act) {
                case Activation::None: post = cache.pre; break;
                case Activation::Relu: post = relu(cache.pre); break;
                case Activation::QRelu:
                    if (opts.quantize_activations) {
                        const QuantParams aq =
                            qparams_for_ceiling(layer.qrelu_ceiling, layer.act_bits);
                        post = qrelu(cache.pre, aq, layer.qrelu_ceiling);
                    } else {
                        post = cache.pre;
                        for (double& v : post.real()) {
                            v = std::clamp(v, 0.0, layer.qrelu_ceiling);
                        }
                    }
                    break;
            }
            x = post;
            caches.push_back(std::move(cache));
        }

        auto yd = x.real();
        if (yd.size() != sample.target.size()) {
            throw std::invalid_argument("loss: output size " + std::to_string(yd.size()) +
                                        " does not match target size " +
                                        std::to_string(sample.target.size()));
        }
        Tensor grad = Tensor::zeros(x.shape());
        auto gd = grad.real();
        for (std::size_t k = 0; k < yd.size(); ++k) {
            const double d = yd[k] - sample.target[k];
            out.loss += d * d;
            gd[k] = 2.0 * d;
        }
        elem_count += yd.size();

        // Backward.
        for (int l = static_cast<int>(graph.layers.size()) - 1; l >= 0; --l) {
            const GraphLayer& layer = graph.layers[l];
            const LayerCache& cache = caches[l];
            const Tensor grad_pre = activation_backward(layer, cache.pre, grad);

            Tensor grad_w = Tensor::zeros(layer.conv.kernel.shape());
            std::vector<double> grad_b(layer.conv.out_channels(), 0.0);
            conv_weight_grads(layer, cache, grad_pre, grad_w, grad_b);

            auto acc_w = out.grads.weights[l].real();
            auto gw = grad_w.real();
            auto wr = layer.conv.kernel.real();
            auto br = layer.conv.bias.real();
            for (std::size_t i = 0; i < gw.size(); ++i) {
                const double g = opts.quantize_weights
                                     ? ste_grad_fake_quant(wr[i], cache.wq, gw[i])
                                     : gw[i];
                acc_w[i] += g;
            }
            for (std::size_t c = 0; c < grad_b.size(); ++c) {
                const double g = opts.quantize_weights
                                     ? ste_grad_fake_quant(br[c], cache.wq, grad_b[c])
                                     : grad_b[c];
                out.grads.bias[l][c] += g;
            }
            if (l > 0) grad = conv_input_grad(layer, cache, grad_pre);
        }
    }

    // Same normalization as the loss: mean over samples and output elements.
    const double inv = 1.0 / static_cast<double>(elem_count);
    out.loss *= inv;
    for (Tensor& t : out.grads.weights) {
        for (double& v : t.real()) v *= inv;
    }
    for (auto& b : out.grads.bias) {
        for (double& v : b) v *= inv;
    }
    return out;
}

void init_graph_weights(LayerGraph& graph, std::uint64_t seed) {
    Rng rng(seed);
    for (GraphLayer& layer : graph.layers) {
        if (layer.kind == LayerKind::MaxPool || layer.kind == LayerKind::Upsample) continue;
        Tensor& k = layer.conv.kernel;
        const double fan_in = static_cast<double>(layer.conv.in_channels()) *
                              layer.conv.kernel_h() * layer.conv.kernel_w();
        const double std_dev = std::sqrt(2.0 / fan_in);
        for (double& v : k.real()) v = rng.normal() * std_dev;
        layer.conv.bias = Tensor::zeros({layer.conv.out_channels()});
    }
}

TrainResult train_toy(const LayerGraph& graph, const BlobTask& task, const TrainConfig& cfg) {
    check_trainable(graph);
    check_bit_width(cfg.weight_bits);
    check_bit_width(cfg.activation_bits);
    if (cfg.learning_rate < 0.0 || cfg.steps <= 0 || cfg.batch_size <= 0) {
        throw std::invalid_argument("train config values must be positive");
    }

    TrainResult result;
    result.graph = graph;
    result.graph.weight_bits = cfg.weight_bits;
    for (GraphLayer& layer : result.graph.layers) {
        if (layer.act == Activation::QRelu) layer.act_bits = cfg.activation_bits;
    }

    ForwardOptions opts;
    opts.quantize_weights = true;
    opts.quantize_activations = true;

    // Held-out eval batch, disjoint from the training stream.
    const std::uint64_t eval_base = 1u << 20;
    std::vector<BlobSample> eval_batch;
    for (int i = 0; i < 32; ++i) eval_batch.push_back(task.sample(eval_base + i));
    result.initial_loss = qat_loss(result.graph, eval_batch, opts);

    std::vector<BlobSample> batch(static_cast<std::size_t>(cfg.batch_size));
    std::uint64_t next_index = cfg.seed * 0x100000000ULL; // stream offset per seed
    for (int step = 0; step < cfg.steps; ++step) {
        for (int b = 0; b < cfg.batch_size; ++b) batch[b] = task.sample(next_index++);
        const LossGrads lg = qat_loss_and_grads(result.graph, batch, opts);
        for (std::size_t l = 0; l < result.graph.layers.size(); ++l) {
            GraphLayer& layer = result.graph.layers[l];
            auto w = layer.conv.kernel.real();
            auto gw = lg.grads.weights[l].real();
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * gw[i];
            auto b = layer.conv.bias.real();
            for (std::size_t c = 0; c < b.size(); ++c) {
                b[c] -= cfg.learning_rate * lg.grads.bias[l][c];
            }
        }
    }

    result.final_loss = qat_loss(result.graph, eval_batch, opts);
    return result;
}

} // namespace qsnn
