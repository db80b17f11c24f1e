#include "qsnn/quant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qsnn {

void check_bit_width(int bit_width) {
    if (bit_width < 2 || bit_width > 8) {
        throw std::invalid_argument("bit_width must be in [2, 8], got " +
                                    std::to_string(bit_width));
    }
}

QuantParams calibrate_qparams(const Tensor& values, int bit_width) {
    check_bit_width(bit_width);
    if (values.size() == 0) {
        throw std::invalid_argument("calibrate_qparams: empty tensor");
    }
    QuantParams qp;
    qp.bit_width = bit_width;
    const double m = values.abs_max();
    qp.scale = m > 0.0 ? m / qp.qmax() : 1.0;
    return qp;
}

std::int32_t quantize(double x, const QuantParams& qp) {
    const double scaled = x / qp.scale;
    // std::round is half-away-from-zero, the rule used everywhere here.
    const double r = std::round(scaled);
    if (r >= qp.qmax()) return qp.qmax();
    if (r <= qp.qmin()) return qp.qmin();
    return static_cast<std::int32_t>(r);
}

double dequantize(std::int32_t code, const QuantParams& qp) {
    return code * qp.scale;
}

Tensor fake_quant(const Tensor& x, const QuantParams& qp) {
    Tensor out = x;
    for (double& v : out.real()) v = dequantize(quantize(v, qp), qp);
    return out;
}

QuantParams qparams_for_ceiling(double ceiling, int bit_width) {
    check_bit_width(bit_width);
    if (ceiling <= 0.0) {
        throw std::invalid_argument("qrelu ceiling must be positive, got " +
                                    std::to_string(ceiling));
    }
    QuantParams qp;
    qp.bit_width = bit_width;
    qp.scale = ceiling / qp.qmax();
    return qp;
}

Tensor qrelu(const Tensor& x, const QuantParams& qp, double ceiling) {
    if (ceiling <= 0.0) {
        throw std::invalid_argument("qrelu ceiling must be positive, got " +
                                    std::to_string(ceiling));
    }
    Tensor out = x;
    for (double& v : out.real()) {
        v = dequantize(quantize(std::clamp(v, 0.0, ceiling), qp), qp);
    }
    return out;
}

namespace {

void check_bn_channels(const BatchNormSpec& bn, int channels, const char* op) {
    const std::size_t c = static_cast<std::size_t>(channels);
    if (bn.gamma.size() != c || bn.beta.size() != c || bn.running_mean.size() != c ||
        bn.running_var.size() != c) {
        throw std::invalid_argument(std::string(op) + ": batch-norm channel count " +
                                    std::to_string(bn.gamma.size()) +
                                    " does not match conv out-channels " +
                                    std::to_string(channels));
    }
    for (double v : bn.running_var) {
        if (v + bn.epsilon <= 0.0) {
            throw std::invalid_argument(std::string(op) + ": running_var + epsilon must be > 0");
        }
    }
}

} // namespace

Tensor apply_batchnorm(const Tensor& x, const BatchNormSpec& bn) {
    if (x.rank() != 4) {
        throw std::invalid_argument("apply_batchnorm: input must be 4-D, got " + x.shape_str());
    }
    check_bn_channels(bn, x.dim(1), "apply_batchnorm");
    Tensor out = x;
    auto o = out.real();
    const int channels = x.dim(1);
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    for (int n = 0; n < x.dim(0); ++n) {
        for (int c = 0; c < channels; ++c) {
            const double g = bn.gamma[c] / std::sqrt(bn.running_var[c] + bn.epsilon);
            double* p = o.data() + (static_cast<std::size_t>(n) * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                p[i] = (p[i] - bn.running_mean[c]) * g + bn.beta[c];
            }
        }
    }
    return out;
}

ConvSpec fold_batchnorm(const ConvSpec& conv, const BatchNormSpec& bn) {
    if (!conv.kernel.is_real()) {
        throw std::invalid_argument("fold_batchnorm: conv kernel must be real-domain");
    }
    check_bn_channels(bn, conv.out_channels(), "fold_batchnorm");

    ConvSpec folded = conv;
    auto w = folded.kernel.real();
    const std::size_t per_out = folded.kernel.size() / conv.out_channels();
    std::vector<double> bias(conv.out_channels(), 0.0);
    if (conv.bias.size() != 0) {
        auto b = conv.bias.real();
        bias.assign(b.begin(), b.end());
    }
    for (int c = 0; c < conv.out_channels(); ++c) {
        const double g = bn.gamma[c] / std::sqrt(bn.running_var[c] + bn.epsilon);
        double* wc = w.data() + static_cast<std::size_t>(c) * per_out;
        for (std::size_t i = 0; i < per_out; ++i) wc[i] *= g;
        bias[c] = (bias[c] - bn.running_mean[c]) * g + bn.beta[c];
    }
    folded.bias = Tensor::from_real({conv.out_channels()}, std::move(bias));
    return folded;
}

} // namespace qsnn
