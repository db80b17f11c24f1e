#ifndef QSNN_SNN_MODEL_HPP
#define QSNN_SNN_MODEL_HPP

#include "qsnn/conv.hpp"
#include "qsnn/tensor.hpp"

#include <cstdint>
#include <vector>

namespace qsnn {

enum class NeuronKind : std::uint8_t { IF, FewdIF };

const char* neuron_kind_name(NeuronKind k);

/// One converted layer: integer weights/biases plus the scale metadata that
/// ties them back to the normalized real weights (w_hat ~= int_weights * s).
struct SnnLayer {
    ConvKind kind = ConvKind::Conv;
    int stride = 1;
    int padding = 0;
    Tensor int_weights;               // int32 domain, (out, in, kh, kw)
    std::vector<std::int32_t> int_bias;
    double min_gap_s = 1.0;           // s_l
    double scale_S = 1.0;             // S_l = 1 / s_l
    std::int64_t int_threshold = 1;   // round(v_th * S_l), >= 1
    NeuronKind neuron = NeuronKind::IF;
    double n_max = 2.0;               // FewdIF clamp, multiples of threshold
    double n_min = -1.0;

    int out_channels() const { return int_weights.dim(0); }
};

struct SnnModel {
    std::vector<SnnLayer> layers;
    double v_th = 1.0;
    double input_max = 1.0; // calibration max of the raw input (M^0)
    int weight_bits = 4;    // declared storage width
};

/// Shape-chains the layers and validates invariants; throws on violation.
void validate(const SnnModel& model, int in_channels, int in_h, int in_w);

} // namespace qsnn

#endif
