#include "qsnn/convert.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace qsnn {

const char* neuron_kind_name(NeuronKind k) {
    return k == NeuronKind::IF ? "if" : "fewdif";
}

void validate(const SnnModel& model, int in_channels, int in_h, int in_w) {
    if (model.layers.empty()) {
        throw std::invalid_argument("snn model has no layers");
    }
    int c = in_channels, h = in_h, w = in_w;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const SnnLayer& layer = model.layers[i];
        if (layer.int_weights.rank() != 4 || !layer.int_weights.is_int()) {
            throw std::invalid_argument("layer " + std::to_string(i) +
                                        ": int_weights must be a 4-D int32 tensor");
        }
        if (layer.int_weights.dim(1) != c) {
            throw std::invalid_argument("layer " + std::to_string(i) + ": expects " +
                                        std::to_string(layer.int_weights.dim(1)) +
                                        " input channels, previous layer provides " +
                                        std::to_string(c));
        }
        if (layer.int_bias.size() != static_cast<std::size_t>(layer.int_weights.dim(0))) {
            throw std::invalid_argument("layer " + std::to_string(i) + ": bias length mismatch");
        }
        if (layer.min_gap_s <= 0.0 || layer.scale_S <= 0.0 || layer.int_threshold < 1) {
            throw std::invalid_argument("layer " + std::to_string(i) +
                                        ": scale metadata out of range");
        }
        if (layer.n_max <= layer.n_min) {
            throw std::invalid_argument("layer " + std::to_string(i) + ": n_max must exceed n_min");
        }
        const int kh = layer.int_weights.dim(2), kw = layer.int_weights.dim(3);
        if (layer.kind == ConvKind::TransposeConv) {
            h = (h - 1) * layer.stride - 2 * layer.padding + kh;
            w = (w - 1) * layer.stride - 2 * layer.padding + kw;
        } else {
            h = (h + 2 * layer.padding - kh) / layer.stride + 1;
            w = (w + 2 * layer.padding - kw) / layer.stride + 1;
        }
        if (h <= 0 || w <= 0) {
            throw std::invalid_argument("layer " + std::to_string(i) +
                                        ": output spatial size is non-positive");
        }
        c = layer.int_weights.dim(0);
    }
}

std::vector<LayerStats> collect_stats(const LayerGraph& graph, std::span<const Tensor> calib,
                                      const StatsOptions& opts) {
    check_runnable(graph);
    if (calib.empty()) {
        throw std::invalid_argument("collect_stats: calibration set is empty");
    }
    if (opts.percentile <= 0.0 || opts.percentile > 1.0) {
        throw std::invalid_argument("collect_stats: percentile must be in (0, 1]");
    }

    const std::size_t n_layers = graph.layers.size();
    const bool exact = opts.percentile >= 1.0;
    std::vector<double> max_in(n_layers, 0.0), max_out(n_layers, 0.0);
    // Percentile mode keeps every observed value; calibration sets are small.
    std::vector<std::vector<double>> all_in(exact ? 0 : n_layers),
        all_out(exact ? 0 : n_layers);

    for (const Tensor& image : calib) {
        ForwardTrace trace = forward(graph, image);
        Tensor in = image;
        for (std::size_t l = 0; l < n_layers; ++l) {
            const Tensor& out = trace.post[l];
            if (exact) {
                max_in[l] = std::max(max_in[l], in.max_value());
                max_out[l] = std::max(max_out[l], out.max_value());
            } else {
                auto id = in.real();
                auto od = out.real();
                all_in[l].insert(all_in[l].end(), id.begin(), id.end());
                all_out[l].insert(all_out[l].end(), od.begin(), od.end());
            }
            in = out;
        }
    }

    auto percentile_of = [&](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        const std::size_t idx = static_cast<std::size_t>(
            std::ceil(opts.percentile * static_cast<double>(v.size())) - 1);
        return v[std::min(idx, v.size() - 1)];
    };

    std::vector<LayerStats> stats(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        double mi = exact ? max_in[l] : percentile_of(all_in[l]);
        double mo = exact ? max_out[l] : percentile_of(all_out[l]);
        // Degenerate all-zero statistics fall back to 1 so normalization
        // stays finite.
        stats[l].max_in = mi > 0.0 ? mi : 1.0;
        stats[l].max_out = mo > 0.0 ? mo : 1.0;
    }
    return stats;
}

std::pair<Tensor, Tensor> layernorm_convert(const Tensor& weights, const Tensor& bias,
                                            double m_prev, double m_cur) {
    if (m_prev <= 0.0 || m_cur <= 0.0) {
        throw std::invalid_argument("layernorm_convert: layer maxima must be positive, got " +
                                    std::to_string(m_prev) + " and " + std::to_string(m_cur));
    }
    Tensor w_hat = weights;
    const double w_factor = m_prev / m_cur;
    for (double& v : w_hat.real()) v *= w_factor;
    Tensor b_hat = bias;
    for (double& v : b_hat.real()) v /= m_cur;
    return {std::move(w_hat), std::move(b_hat)};
}

LayerGraph layernorm_convert_graph(const LayerGraph& graph, std::span<const LayerStats> stats) {
    if (stats.size() != graph.layers.size()) {
        throw std::invalid_argument("layernorm_convert_graph: stats count " +
                                    std::to_string(stats.size()) + " does not match layer count " +
                                    std::to_string(graph.layers.size()));
    }
    LayerGraph out = graph;
    for (std::size_t l = 0; l < out.layers.size(); ++l) {
        GraphLayer& layer = out.layers[l];
        if (layer.has_bn) {
            throw std::invalid_argument("layer " + std::to_string(l) +
                                        ": fold batch norm before conversion (fold_batchnorm)");
        }
        auto [w_hat, b_hat] =
            layernorm_convert(layer.conv.kernel, layer.conv.bias, stats[l].max_in,
                              stats[l].max_out);
        layer.conv.kernel = std::move(w_hat);
        layer.conv.bias = std::move(b_hat);
        // The grid ceiling tracks the normalized range.
        if (layer.act == Activation::QRelu) layer.qrelu_ceiling = 1.0;
    }
    return out;
}

std::pair<Tensor, Tensor> quantized_layernorm_convert(
    const Tensor& weight_codes, const Tensor& bias_codes, std::int32_t max_prev_code,
    std::int32_t max_cur_code, const QuantParams& weight_qp, const QuantParams& bias_qp,
    const QuantParams& act_prev_qp, const QuantParams& act_cur_qp) {
    if (max_prev_code <= 0 || max_cur_code <= 0) {
        throw std::invalid_argument("quantized_layernorm_convert: quantized maxima must be "
                                    "positive, got " +
                                    std::to_string(max_prev_code) + " and " +
                                    std::to_string(max_cur_code));
    }
    const double m_prev = dequantize(max_prev_code, act_prev_qp);
    const double m_cur = dequantize(max_cur_code, act_cur_qp);

    auto codes = weight_codes.ints();
    std::vector<double> w(codes.size());
    // Single common factor per layer keeps equal codes exactly equal and
    // ratios exactly the code ratios.
    const double w_factor = weight_qp.scale * m_prev / m_cur;
    for (std::size_t i = 0; i < codes.size(); ++i) w[i] = codes[i] * w_factor;

    auto bcodes = bias_codes.ints();
    std::vector<double> b(bcodes.size());
    const double b_factor = bias_qp.scale / m_cur;
    for (std::size_t i = 0; i < bcodes.size(); ++i) b[i] = bcodes[i] * b_factor;

    return {Tensor::from_real(weight_codes.shape(), std::move(w)),
            Tensor::from_real(bias_codes.shape(), std::move(b))};
}

double min_weight_gap(const Tensor& weights) {
    auto w = weights.real();
    if (w.empty()) {
        throw std::invalid_argument("min_weight_gap: layer has no weights");
    }
    std::vector<double> vals(w.begin(), w.end());
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());

    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < vals.size(); ++i) {
        const double d = vals[i] - vals[i - 1];
        if (d > 0.0) gap = std::min(gap, d);
    }
    if (std::isfinite(gap)) return gap;

    // Degenerate: one distinct value. Use |v| so the mapping stays exact,
    // or 1 for an all-zero layer.
    const double v = std::fabs(vals[0]);
    return v > 0.0 ? v : 1.0;
}

SnnLayer scale_aware_map(const Tensor& w_hat, const Tensor& b_hat, double v_th) {
    if (v_th <= 0.0) {
        throw std::invalid_argument("scale_aware_map: v_th must be positive");
    }
    SnnLayer layer;
    layer.min_gap_s = min_weight_gap(w_hat);
    layer.scale_S = 1.0 / layer.min_gap_s;

    auto w = w_hat.real();
    std::vector<std::int32_t> codes(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double scaled = w[i] * layer.scale_S;
        const long long c = std::llround(scaled);
        if (c > std::numeric_limits<std::int32_t>::max() ||
            c < std::numeric_limits<std::int32_t>::min()) {
            throw std::overflow_error("scale_aware_map: integer weight " + std::to_string(c) +
                                      " exceeds int32");
        }
        codes[i] = static_cast<std::int32_t>(c);
    }
    layer.int_weights = Tensor::from_int(w_hat.shape(), std::move(codes));

    auto b = b_hat.real();
    layer.int_bias.resize(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        const long long c = std::llround(b[i] * layer.scale_S);
        if (c > std::numeric_limits<std::int32_t>::max() ||
            c < std::numeric_limits<std::int32_t>::min()) {
            throw std::overflow_error("scale_aware_map: integer bias " + std::to_string(c) +
                                      " exceeds int32");
        }
        layer.int_bias[i] = static_cast<std::int32_t>(c);
    }

    layer.int_threshold = std::max<std::int64_t>(1, std::llround(v_th * layer.scale_S));
    return layer;
}

namespace {

int bits_needed(const Tensor& int_weights) {
    std::int64_t m = 0;
    for (std::int32_t v : int_weights.ints()) {
        m = std::max<std::int64_t>(m, std::llabs(static_cast<std::int64_t>(v)));
    }
    // Smallest signed width with symmetric range covering m.
    int bits = 2;
    while (bits < 32 && m > (std::int64_t(1) << (bits - 1)) - 1) ++bits;
    return bits;
}

double max_rounding_error(const SnnLayer& layer, const Tensor& w_hat) {
    auto w = w_hat.real();
    auto c = layer.int_weights.ints();
    double err = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        err = std::max(err, std::fabs(c[i] * layer.min_gap_s - w[i]));
    }
    return err;
}

} // namespace

std::string ConversionReport::table() const {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-6s %-14s %-14s %-10s %-14s\n", "layer", "s_l", "S_l",
                  "bits_used", "max_round_err");
    os << line;
    for (const LayerReport& r : layers) {
        std::snprintf(line, sizeof line, "%-6d %-14.6g %-14.6g %-10d %-14.6g\n", r.index,
                      r.min_gap_s, r.scale_S, r.bits_used, r.max_round_err);
        os << line;
    }
    return os.str();
}

std::string ConversionReport::key_values() const {
    std::ostringstream os;
    char line[224];
    for (const LayerReport& r : layers) {
        std::snprintf(line, sizeof line,
                      "layer=%d s_l=%.17g S_l=%.17g bits_used=%d max_round_err=%.17g\n", r.index,
                      r.min_gap_s, r.scale_S, r.bits_used, r.max_round_err);
        os << line;
    }
    return os.str();
}

ConvertResult convert_model(const LayerGraph& graph, std::span<const Tensor> calib,
                            const ConvertOptions& opts) {
    for (std::size_t i = 0; i < graph.layers.size(); ++i) {
        const LayerKind k = graph.layers[i].kind;
        if (k == LayerKind::MaxPool) {
            throw std::invalid_argument("layer " + std::to_string(i) +
                                        ": max-pool must be replaced by strided conv "
                                        "(down-sampling convolution) before conversion");
        }
        if (k == LayerKind::Upsample) {
            throw std::invalid_argument("layer " + std::to_string(i) +
                                        ": upsample must be replaced by transpose conv "
                                        "before conversion");
        }
        if (graph.layers[i].has_bn) {
            throw std::invalid_argument("layer " + std::to_string(i) +
                                        ": fold batch norm before conversion (fold_batchnorm)");
        }
    }
    if (opts.n_max <= opts.n_min) {
        throw std::invalid_argument("convert: n_max must exceed n_min");
    }
    check_bit_width(opts.weight_bits);

    const std::vector<LayerStats> stats = collect_stats(graph, calib);
    const LayerGraph normalized = layernorm_convert_graph(graph, stats);

    ConvertResult result;
    result.model.v_th = opts.v_th;
    result.model.input_max = stats.front().max_in;
    result.model.weight_bits = opts.weight_bits;
    for (std::size_t l = 0; l < normalized.layers.size(); ++l) {
        const GraphLayer& src = normalized.layers[l];
        SnnLayer layer = scale_aware_map(src.conv.kernel, src.conv.bias, opts.v_th);
        layer.kind = src.kind == LayerKind::TransposeConv ? ConvKind::TransposeConv
                     : src.kind == LayerKind::StridedConv ? ConvKind::StridedConv
                                                          : ConvKind::Conv;
        layer.stride = src.conv.stride;
        layer.padding = src.conv.padding;
        layer.neuron = opts.neuron;
        layer.n_max = opts.n_max;
        layer.n_min = opts.n_min;

        LayerReport report;
        report.index = static_cast<int>(l);
        report.min_gap_s = layer.min_gap_s;
        report.scale_S = layer.scale_S;
        report.bits_used = bits_needed(layer.int_weights);
        report.max_round_err = max_rounding_error(layer, src.conv.kernel);
        result.report.layers.push_back(report);
        result.model.layers.push_back(std::move(layer));
    }
    validate(result.model, graph.in_channels, graph.in_h, graph.in_w);
    return result;
}

} // namespace qsnn
