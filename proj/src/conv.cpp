#include "qsnn/conv.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace qsnn {

const char* conv_kind_name(ConvKind k) {
    switch (k) {
        case ConvKind::Conv: return "conv";
        case ConvKind::StridedConv: return "strided-conv";
        case ConvKind::TransposeConv: return "transpose-conv";
    }
    return "?";
}

namespace {

void check_conv_args(const Tensor& input, const ConvSpec& spec, const char* op) {
    if (input.rank() != 4) {
        throw std::invalid_argument(std::string(op) + ": input must be 4-D (n,c,h,w), got " +
                                    input.shape_str());
    }
    if (spec.kernel.rank() != 4) {
        throw std::invalid_argument(std::string(op) + ": kernel must be 4-D (out,in,kh,kw), got " +
                                    spec.kernel.shape_str());
    }
    if (input.dim(1) != spec.in_channels()) {
        throw std::invalid_argument(std::string(op) + ": input channel count " +
                                    std::to_string(input.dim(1)) +
                                    " does not match kernel in-channels " +
                                    std::to_string(spec.in_channels()));
    }
    if (input.domain() != spec.kernel.domain()) {
        throw std::invalid_argument(std::string(op) + ": element domain mismatch, input is " +
                                    domain_name(input.domain()) + " but kernel is " +
                                    domain_name(spec.kernel.domain()));
    }
    if (spec.bias.size() != 0) {
        if (spec.bias.rank() != 1 || spec.bias.dim(0) != spec.out_channels()) {
            throw std::invalid_argument(std::string(op) + ": bias length " +
                                        std::to_string(spec.bias.size()) +
                                        " does not match out-channel count " +
                                        std::to_string(spec.out_channels()));
        }
        if (spec.bias.domain() != spec.kernel.domain()) {
            throw std::invalid_argument(std::string(op) + ": bias domain " +
                                        domain_name(spec.bias.domain()) +
                                        " does not match kernel domain " +
                                        domain_name(spec.kernel.domain()));
        }
    }
    if (spec.stride < 1) {
        throw std::invalid_argument(std::string(op) + ": stride must be >= 1, got " +
                                    std::to_string(spec.stride));
    }
    if (spec.padding < 0) {
        throw std::invalid_argument(std::string(op) + ": padding must be >= 0, got " +
                                    std::to_string(spec.padding));
    }
}

std::int32_t checked_int32(std::int64_t v, const char* op) {
    if (v > std::numeric_limits<std::int32_t>::max() ||
        v < std::numeric_limits<std::int32_t>::min()) {
        throw std::overflow_error(std::string(op) + ": int32 overflow, accumulated value " +
                                  std::to_string(v));
    }
    return static_cast<std::int32_t>(v);
}

template <typename T, typename Acc>
void conv2d_loop(const Tensor& input, const ConvSpec& spec, Tensor& out,
                 std::span<const T> in, std::span<const T> ker, std::span<Acc> acc) {
    const int batch = input.dim(0), in_c = input.dim(1), in_h = input.dim(2), in_w = input.dim(3);
    const int out_c = spec.out_channels(), k_h = spec.kernel_h(), k_w = spec.kernel_w();
    const int out_h = out.dim(2), out_w = out.dim(3);
    const int stride = spec.stride, pad = spec.padding;

    for (int n = 0; n < batch; ++n) {
        for (int ci = 0; ci < in_c; ++ci) {
            const T* in_plane = in.data() + (static_cast<std::size_t>(n) * in_c + ci) *
                                                static_cast<std::size_t>(in_h) * in_w;
            for (int co = 0; co < out_c; ++co) {
                const T* k_plane = ker.data() + (static_cast<std::size_t>(co) * in_c + ci) *
                                                    static_cast<std::size_t>(k_h) * k_w;
                Acc* out_plane = acc.data() + (static_cast<std::size_t>(n) * out_c + co) *
                                                  static_cast<std::size_t>(out_h) * out_w;
                for (int oy = 0; oy < out_h; ++oy) {
                    for (int ox = 0; ox < out_w; ++ox) {
                        Acc sum = 0;
                        const int iy0 = oy * stride - pad;
                        const int ix0 = ox * stride - pad;
                        const int ky_lo = std::max(0, -iy0);
                        const int ky_hi = std::min(k_h, in_h - iy0);
                        const int kx_lo = std::max(0, -ix0);
                        const int kx_hi = std::min(k_w, in_w - ix0);
                        for (int ky = ky_lo; ky < ky_hi; ++ky) {
                            const T* in_row = in_plane + static_cast<std::size_t>(iy0 + ky) * in_w + ix0;
                            const T* k_row = k_plane + static_cast<std::size_t>(ky) * k_w;
                            for (int kx = kx_lo; kx < kx_hi; ++kx) {
                                const T v = in_row[kx];
                                if (v != T(0)) sum += static_cast<Acc>(v) * static_cast<Acc>(k_row[kx]);
                            }
                        }
                        out_plane[static_cast<std::size_t>(oy) * out_w + ox] += sum;
                    }
                }
            }
        }
    }
}

template <typename T, typename Acc>
void transpose_conv2d_loop(const Tensor& input, const ConvSpec& spec, Tensor& out,
                           std::span<const T> in, std::span<const T> ker, std::span<Acc> acc) {
    const int batch = input.dim(0), in_c = input.dim(1), in_h = input.dim(2), in_w = input.dim(3);
    const int out_c = spec.out_channels(), k_h = spec.kernel_h(), k_w = spec.kernel_w();
    const int out_h = out.dim(2), out_w = out.dim(3);
    const int stride = spec.stride, pad = spec.padding;

    // Scatter: each input element contributes its kernel-weighted footprint.
    for (int n = 0; n < batch; ++n) {
        for (int ci = 0; ci < in_c; ++ci) {
            const T* in_plane = in.data() + (static_cast<std::size_t>(n) * in_c + ci) *
                                                static_cast<std::size_t>(in_h) * in_w;
            for (int co = 0; co < out_c; ++co) {
                const T* k_plane = ker.data() + (static_cast<std::size_t>(co) * in_c + ci) *
                                                    static_cast<std::size_t>(k_h) * k_w;
                Acc* out_plane = acc.data() + (static_cast<std::size_t>(n) * out_c + co) *
                                                  static_cast<std::size_t>(out_h) * out_w;
                for (int iy = 0; iy < in_h; ++iy) {
                    for (int ix = 0; ix < in_w; ++ix) {
                        const T v = in_plane[static_cast<std::size_t>(iy) * in_w + ix];
                        if (v == T(0)) continue;
                        for (int ky = 0; ky < k_h; ++ky) {
                            const int oy = iy * stride + ky - pad;
                            if (oy < 0 || oy >= out_h) continue;
                            for (int kx = 0; kx < k_w; ++kx) {
                                const int ox = ix * stride + kx - pad;
                                if (ox < 0 || ox >= out_w) continue;
                                out_plane[static_cast<std::size_t>(oy) * out_w + ox] +=
                                    static_cast<Acc>(v) *
                                    static_cast<Acc>(k_plane[static_cast<std::size_t>(ky) * k_w + kx]);
                            }
                        }
                    }
                }
            }
        }
    }
}

Tensor finish_real(Tensor&& out, const ConvSpec& spec) {
    if (spec.bias.size() != 0) {
        auto b = spec.bias.real();
        auto o = out.real();
        const int out_c = out.dim(1);
        const std::size_t plane = static_cast<std::size_t>(out.dim(2)) * out.dim(3);
        for (int n = 0; n < out.dim(0); ++n) {
            for (int c = 0; c < out_c; ++c) {
                double* p = o.data() + (static_cast<std::size_t>(n) * out_c + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) p[i] += b[c];
            }
        }
    }
    return std::move(out);
}

Tensor finish_int(const Tensor& proto, const std::vector<std::int64_t>& acc, const ConvSpec& spec,
                  const char* op) {
    std::vector<std::int32_t> vals(acc.size());
    const int out_c = proto.dim(1);
    const std::size_t plane = static_cast<std::size_t>(proto.dim(2)) * proto.dim(3);
    auto bias = spec.bias.size() != 0 ? spec.bias.ints() : std::span<const std::int32_t>();
    for (int n = 0; n < proto.dim(0); ++n) {
        for (int c = 0; c < out_c; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * out_c + c) * plane;
            const std::int64_t b = bias.empty() ? 0 : bias[c];
            for (std::size_t i = 0; i < plane; ++i) {
                vals[base + i] = checked_int32(acc[base + i] + b, op);
            }
        }
    }
    return Tensor::from_int(proto.shape(), std::move(vals));
}

} // namespace

Tensor conv2d(const Tensor& input, const ConvSpec& spec) {
    check_conv_args(input, spec, "conv2d");
    if (spec.kind == ConvKind::TransposeConv) {
        throw std::invalid_argument("conv2d: spec kind is transpose-conv, use transpose_conv2d");
    }
    const int span_h = input.dim(2) + 2 * spec.padding - spec.kernel_h();
    const int span_w = input.dim(3) + 2 * spec.padding - spec.kernel_w();
    if (span_h < 0 || span_w < 0) {
        throw std::invalid_argument("conv2d: kernel " + spec.kernel.shape_str() +
                                    " does not fit input " + input.shape_str() + " with pad " +
                                    std::to_string(spec.padding));
    }
    const int out_h = span_h / spec.stride + 1;
    const int out_w = span_w / spec.stride + 1;
    std::vector<int> out_shape{input.dim(0), spec.out_channels(), out_h, out_w};

    if (input.is_real()) {
        Tensor out = Tensor::zeros(out_shape, Domain::Real);
        conv2d_loop<double, double>(input, spec, out, input.real(), spec.kernel.real(), out.real());
        return finish_real(std::move(out), spec);
    }
    Tensor proto = Tensor::zeros(out_shape, Domain::Int32);
    std::vector<std::int64_t> acc(proto.size(), 0);
    conv2d_loop<std::int32_t, std::int64_t>(input, spec, proto, input.ints(), spec.kernel.ints(),
                                            std::span<std::int64_t>(acc));
    return finish_int(proto, acc, spec, "conv2d");
}

Tensor transpose_conv2d(const Tensor& input, const ConvSpec& spec) {
    check_conv_args(input, spec, "transpose_conv2d");
    if (spec.kind != ConvKind::TransposeConv) {
        throw std::invalid_argument("transpose_conv2d: spec kind is " +
                                    std::string(conv_kind_name(spec.kind)) +
                                    ", expected transpose-conv");
    }
    const int out_h = (input.dim(2) - 1) * spec.stride - 2 * spec.padding + spec.kernel_h();
    const int out_w = (input.dim(3) - 1) * spec.stride - 2 * spec.padding + spec.kernel_w();
    if (out_h <= 0 || out_w <= 0) {
        throw std::invalid_argument("transpose_conv2d: output size is non-positive for input " +
                                    input.shape_str());
    }
    std::vector<int> out_shape{input.dim(0), spec.out_channels(), out_h, out_w};

    if (input.is_real()) {
        Tensor out = Tensor::zeros(out_shape, Domain::Real);
        transpose_conv2d_loop<double, double>(input, spec, out, input.real(), spec.kernel.real(),
                                              out.real());
        return finish_real(std::move(out), spec);
    }
    Tensor proto = Tensor::zeros(out_shape, Domain::Int32);
    std::vector<std::int64_t> acc(proto.size(), 0);
    transpose_conv2d_loop<std::int32_t, std::int64_t>(input, spec, proto, input.ints(),
                                                      spec.kernel.ints(),
                                                      std::span<std::int64_t>(acc));
    return finish_int(proto, acc, spec, "transpose_conv2d");
}

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.real()) v = std::max(0.0, v);
    return out;
}

} // namespace qsnn
