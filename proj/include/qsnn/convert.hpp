#ifndef QSNN_CONVERT_HPP
#define QSNN_CONVERT_HPP

#include "qsnn/graph.hpp"
#include "qsnn/snn_model.hpp"

#include <span>
#include <string>
#include <vector>

namespace qsnn {

/// Per-layer activation statistics over a calibration set: max element of the
/// layer input and of the post-activation output.
struct LayerStats {
    double max_in = 1.0;
    double max_out = 1.0;
};

struct StatsOptions {
    /// Exact maximum by default; a percentile in (0, 1) switches to a
    /// robust-statistics variant (not used by any acceptance path).
    double percentile = 1.0;
};

std::vector<LayerStats> collect_stats(const LayerGraph& graph, std::span<const Tensor> calib,
                                      const StatsOptions& opts = {});

/// Weight/bias rescaling so post-activation outputs land in [0, 1]:
/// w_hat = w * m_prev / m_cur, b_hat = b / m_cur.
std::pair<Tensor, Tensor> layernorm_convert(const Tensor& weights, const Tensor& bias,
                                            double m_prev, double m_cur);

/// Graph-level normalization. The returned graph's activations on the
/// calibration data lie in [0, 1] when inputs are divided by
/// stats[0].max_in first.
LayerGraph layernorm_convert_graph(const LayerGraph& graph,
                                   std::span<const LayerStats> stats);

/// The quantized-code variant: weights, maxima and biases arrive as integer
/// codes with their quantizers; the result is the same w_hat, b_hat set
/// expressed in reals. Every w_hat is a common rational multiple of its code.
std::pair<Tensor, Tensor> quantized_layernorm_convert(const Tensor& weight_codes,
                                                      const Tensor& bias_codes,
                                                      std::int32_t max_prev_code,
                                                      std::int32_t max_cur_code,
                                                      const QuantParams& weight_qp,
                                                      const QuantParams& bias_qp,
                                                      const QuantParams& act_prev_qp,
                                                      const QuantParams& act_cur_qp);

/// Minimum nonzero |w_i - w_j| over distinct weight values. Degenerate
/// layers: a single distinct nonzero value v gives |v|; all-zero gives 1.
double min_weight_gap(const Tensor& weights);

/// Scale-aware integer mapping of one normalized layer:
/// s = min gap, S = 1/s, int_w = round(w_hat * S), int_b = round(b_hat * S)
/// (32-bit), int_threshold = max(1, round(v_th * S)).
SnnLayer scale_aware_map(const Tensor& w_hat, const Tensor& b_hat, double v_th);

struct LayerReport {
    int index = 0;
    double min_gap_s = 0.0;
    double scale_S = 0.0;
    int bits_used = 0;          // smallest signed width holding every int weight
    double max_round_err = 0.0; // max |int_w * s - w_hat|
};

struct ConversionReport {
    std::vector<LayerReport> layers;
    std::string table() const;      // line-oriented text table
    std::string key_values() const; // one record per layer, key=value pairs
};

struct ConvertOptions {
    double v_th = 1.0;
    NeuronKind neuron = NeuronKind::IF;
    double n_max = 2.0;  // FewdIF bounds, in multiples of the threshold
    double n_min = -1.0;
    int weight_bits = 4; // declared width recorded in the model
};

struct ConvertResult {
    SnnModel model;
    ConversionReport report;
};

/// Full generation pipeline: calibrate, normalize, scale-aware map per layer.
ConvertResult convert_model(const LayerGraph& graph, std::span<const Tensor> calib,
                            const ConvertOptions& opts);

} // namespace qsnn

#endif
