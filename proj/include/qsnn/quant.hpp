#ifndef QSNN_QUANT_HPP
#define QSNN_QUANT_HPP

#include "qsnn/conv.hpp"
#include "qsnn/tensor.hpp"

#include <cstdint>

namespace qsnn {

/// Symmetric per-tensor quantizer: zero-point 0, code range
/// [-(2^(b-1)-1), 2^(b-1)-1]. The -2^(b-1) code is reserved.
struct QuantParams {
    int bit_width = 8;
    double scale = 1.0; // real units per integer step, > 0

    std::int32_t qmax() const { return (1 << (bit_width - 1)) - 1; }
    std::int32_t qmin() const { return -qmax(); }
    /// Largest |x| that quantizes without saturating.
    double range() const { return scale * qmax(); }
};

/// Inference-time batch-norm parameters, per output channel.
struct BatchNormSpec {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double epsilon = 1e-5;
};

/// scale = max|values| / qmax, or 1 when the tensor is all zero.
QuantParams calibrate_qparams(const Tensor& values, int bit_width);

/// clamp(round-half-away-from-zero(x / scale), qmin, qmax). Saturating.
std::int32_t quantize(double x, const QuantParams& qp);

double dequantize(std::int32_t code, const QuantParams& qp);

/// Elementwise quantize-then-dequantize; values land on the quantization grid.
Tensor fake_quant(const Tensor& x, const QuantParams& qp);

/// Quantized ReLU: fake_quant(clamp(x, 0, ceiling)).
Tensor qrelu(const Tensor& x, const QuantParams& qp, double ceiling);

/// Quantizer whose grid puts `ceiling` exactly on the top code.
QuantParams qparams_for_ceiling(double ceiling, int bit_width);

/// Apply batch norm (inference form) over channel dim of a 4-D tensor.
Tensor apply_batchnorm(const Tensor& x, const BatchNormSpec& bn);

/// Fold BN into the conv: w' = w * g / sqrt(var + eps),
/// b' = (b - mean) * g / sqrt(var + eps) + beta, per output channel.
ConvSpec fold_batchnorm(const ConvSpec& conv, const BatchNormSpec& bn);

void check_bit_width(int bit_width);

} // namespace qsnn

#endif
