#ifndef QSNN_CONV_HPP
#define QSNN_CONV_HPP

#include "qsnn/tensor.hpp"

namespace qsnn {

enum class ConvKind : std::uint8_t { Conv, StridedConv, TransposeConv };

const char* conv_kind_name(ConvKind k);

/// Convolution layer parameters. Kernel layout is (out_ch, in_ch, kH, kW)
/// for every kind, bias is 1-D (out_ch). Cross-correlation convention, no
/// kernel flip. Zero padding only.
struct ConvSpec {
    ConvKind kind = ConvKind::Conv;
    Tensor kernel;
    Tensor bias;
    int stride = 1;
    int padding = 0;

    int out_channels() const { return kernel.dim(0); }
    int in_channels() const { return kernel.dim(1); }
    int kernel_h() const { return kernel.dim(2); }
    int kernel_w() const { return kernel.dim(3); }
};

/// 2-D cross-correlation with stride and zero padding.
/// Output spatial size: floor((H + 2*pad - kH) / stride) + 1.
/// Integer-domain results are checked against the int32 range.
Tensor conv2d(const Tensor& input, const ConvSpec& spec);

/// Fractionally-strided convolution (adjoint of conv2d).
/// Output spatial size: (H - 1)*stride - 2*pad + kH.
Tensor transpose_conv2d(const Tensor& input, const ConvSpec& spec);

/// Elementwise max(0, x) on a real tensor.
Tensor relu(const Tensor& input);

} // namespace qsnn

#endif
