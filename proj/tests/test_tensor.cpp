#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qsnn/conv.hpp"
#include "test_util.hpp"

#include <stdexcept>

using namespace qsnn;
using namespace qsnn::test;

namespace {

double pixel(const Tensor& t, int n, int c, int y, int x) {
    if (y < 0 || y >= t.dim(2) || x < 0 || x >= t.dim(3)) return 0.0;
    return t.real_at(n, c, y, x);
}

// Textbook cross-correlation, written independently of the library loop.
// Takes separate pads per axis so it can also express the flipped-kernel
// equivalent of a transpose conv with kh != kw.
Tensor conv_oracle2(const Tensor& in, const Tensor& k, const Tensor& bias, int stride, int pad_h,
                    int pad_w) {
    const int out_h = (in.dim(2) + 2 * pad_h - k.dim(2)) / stride + 1;
    const int out_w = (in.dim(3) + 2 * pad_w - k.dim(3)) / stride + 1;
    Tensor out = Tensor::zeros({in.dim(0), k.dim(0), out_h, out_w});
    for (int n = 0; n < in.dim(0); ++n) {
        for (int co = 0; co < k.dim(0); ++co) {
            for (int oy = 0; oy < out_h; ++oy) {
                for (int ox = 0; ox < out_w; ++ox) {
                    double acc = bias.size() ? bias.real()[co] : 0.0;
                    for (int ci = 0; ci < k.dim(1); ++ci) {
                        for (int ky = 0; ky < k.dim(2); ++ky) {
                            for (int kx = 0; kx < k.dim(3); ++kx) {
                                acc += pixel(in, n, ci, oy * stride + ky - pad_h,
                                             ox * stride + kx - pad_w) *
                                       k.real_at(co, ci, ky, kx);
                            }
                        }
                    }
                    out.real()[out.index(n, co, oy, ox)] = acc;
                }
            }
        }
    }
    return out;
}

Tensor conv_oracle(const Tensor& in, const Tensor& k, const Tensor& bias, int stride, int pad) {
    return conv_oracle2(in, k, bias, stride, pad, pad);
}

// Transpose conv oracle: insert stride-1 zeros between input elements, then
// run the conv oracle with the spatially flipped kernel and pad kH-1-pad.
Tensor transpose_conv_oracle(const Tensor& in, const Tensor& k, const Tensor& bias, int stride,
                             int pad) {
    const int sh = (in.dim(2) - 1) * stride + 1;
    const int sw = (in.dim(3) - 1) * stride + 1;
    Tensor stuffed = Tensor::zeros({in.dim(0), in.dim(1), sh, sw});
    for (int n = 0; n < in.dim(0); ++n) {
        for (int c = 0; c < in.dim(1); ++c) {
            for (int y = 0; y < in.dim(2); ++y) {
                for (int x = 0; x < in.dim(3); ++x) {
                    stuffed.real()[stuffed.index(n, c, y * stride, x * stride)] =
                        in.real_at(n, c, y, x);
                }
            }
        }
    }
    Tensor flipped = Tensor::zeros(k.shape());
    for (int co = 0; co < k.dim(0); ++co) {
        for (int ci = 0; ci < k.dim(1); ++ci) {
            for (int ky = 0; ky < k.dim(2); ++ky) {
                for (int kx = 0; kx < k.dim(3); ++kx) {
                    flipped.real()[flipped.index(co, ci, k.dim(2) - 1 - ky, k.dim(3) - 1 - kx)] =
                        k.real_at(co, ci, ky, kx);
                }
            }
        }
    }
    return conv_oracle2(stuffed, flipped, bias, 1, k.dim(2) - 1 - pad, k.dim(3) - 1 - pad);
}

ConvSpec make_spec(Tensor kernel, Tensor bias, int stride, int pad,
                   ConvKind kind = ConvKind::Conv) {
    ConvSpec spec;
    spec.kind = kind;
    spec.kernel = std::move(kernel);
    spec.bias = std::move(bias);
    spec.stride = stride;
    spec.padding = pad;
    return spec;
}

} // namespace

TEST_CASE("conv2d all-ones 3x3 gives the window sum") {
    const Tensor in = Tensor::full({1, 1, 3, 3}, 1.0);
    const Tensor k = Tensor::full({1, 1, 3, 3}, 1.0);
    const Tensor out = conv2d(in, make_spec(k, Tensor::zeros({1}), 1, 0));
    REQUIRE(out.shape() == std::vector<int>{1, 1, 1, 1});
    CHECK(out.real()[0] == doctest::Approx(9.0).epsilon(1e-15));
}

TEST_CASE("conv2d identity kernel returns the input") {
    Rng rng(7);
    const Tensor in = rand_real(rng, {2, 1, 4, 5});
    const Tensor k = Tensor::full({1, 1, 1, 1}, 1.0);
    const Tensor out = conv2d(in, make_spec(k, Tensor::zeros({1}), 1, 0));
    CHECK(max_abs_diff(out, in) == 0.0);
}

TEST_CASE("conv2d matches the brute-force oracle, stride 2 pad 1") {
    Rng rng(11);
    const Tensor in = rand_real(rng, {1, 2, 5, 5});
    const Tensor k = rand_real(rng, {3, 2, 3, 3});
    const Tensor b = rand_real(rng, {3});
    const Tensor got = conv2d(in, make_spec(k, b, 2, 1));
    const Tensor want = conv_oracle(in, k, b, 2, 1);
    REQUIRE(got.shape() == want.shape());
    CHECK(max_abs_diff(got, want) <= 1e-12);
}

TEST_CASE("conv2d random instances match the oracle") {
    Rng rng(19);
    for (int it = 0; it < 60; ++it) {
        const int in_c = static_cast<int>(rng.uniform_int(1, 4));
        const int out_c = static_cast<int>(rng.uniform_int(1, 4));
        const int h = static_cast<int>(rng.uniform_int(2, 8));
        const int w = static_cast<int>(rng.uniform_int(2, 8));
        const int kh = static_cast<int>(rng.uniform_int(1, std::min(h, 3)));
        const int kw = static_cast<int>(rng.uniform_int(1, std::min(w, 3)));
        const int stride = static_cast<int>(rng.uniform_int(1, 2));
        const int pad = static_cast<int>(rng.uniform_int(0, 1));
        const Tensor in = rand_real(rng, {1, in_c, h, w});
        const Tensor k = rand_real(rng, {out_c, in_c, kh, kw});
        const Tensor b = rand_real(rng, {out_c});
        const Tensor got = conv2d(in, make_spec(k, b, stride, pad));
        const Tensor want = conv_oracle(in, k, b, stride, pad);
        REQUIRE(got.shape() == want.shape());
        CHECK(max_abs_diff(got, want) <= 1e-12);
    }
}

TEST_CASE("integer conv2d is exact against the oracle") {
    Rng rng(23);
    for (int it = 0; it < 40; ++it) {
        const int in_c = static_cast<int>(rng.uniform_int(1, 4));
        const int out_c = static_cast<int>(rng.uniform_int(1, 4));
        const int h = static_cast<int>(rng.uniform_int(2, 8));
        const int w = static_cast<int>(rng.uniform_int(2, 8));
        const int kh = static_cast<int>(rng.uniform_int(1, std::min(h, 3)));
        const int kw = static_cast<int>(rng.uniform_int(1, std::min(w, 3)));
        // Magnitudes bounded so no element can leave the int32 range.
        const Tensor in = rand_int(rng, {1, in_c, h, w}, -500, 500);
        const Tensor k = rand_int(rng, {out_c, in_c, kh, kw}, -500, 500);
        const Tensor b = rand_int(rng, {out_c}, -1000, 1000);
        const Tensor got = conv2d(in, make_spec(k, b, 1, 1));
        const Tensor want = conv_oracle(in.to_real(), k.to_real(), b.to_real(), 1, 1);
        auto gi = got.ints();
        auto wr = want.real();
        REQUIRE(gi.size() == wr.size());
        for (std::size_t i = 0; i < gi.size(); ++i) {
            CHECK(static_cast<double>(gi[i]) == wr[i]);
        }
    }
}

TEST_CASE("integer conv2d detects int32 overflow") {
    const Tensor in = Tensor::from_int({1, 1, 1, 1}, {2000000000});
    const Tensor k = Tensor::from_int({1, 1, 1, 1}, {2});
    CHECK_THROWS_AS(conv2d(in, make_spec(k, Tensor(), 1, 0)), std::overflow_error);
}

TEST_CASE("conv2d is linear in its input") {
    Rng rng(29);
    const Tensor x = rand_real(rng, {1, 2, 6, 6});
    const Tensor y = rand_real(rng, {1, 2, 6, 6});
    const Tensor k = rand_real(rng, {2, 2, 3, 3});
    const ConvSpec spec = make_spec(k, Tensor(), 1, 1);
    const double a = 1.7, b = -0.4;

    Tensor combo = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < combo.size(); ++i) {
        combo.real()[i] = a * x.real()[i] + b * y.real()[i];
    }
    const Tensor lhs = conv2d(combo, spec);
    const Tensor cx = conv2d(x, spec);
    const Tensor cy = conv2d(y, spec);
    Tensor rhs = Tensor::zeros(lhs.shape());
    for (std::size_t i = 0; i < rhs.size(); ++i) {
        rhs.real()[i] = a * cx.real()[i] + b * cy.real()[i];
    }
    CHECK(max_abs_diff(lhs, rhs) <= 1e-12);
}

TEST_CASE("conv2d error paths") {
    Rng rng(31);
    const Tensor in = rand_real(rng, {1, 2, 4, 4});
    SUBCASE("channel mismatch names the dimension") {
        const Tensor k = rand_real(rng, {1, 3, 3, 3});
        CHECK_THROWS_WITH_AS(conv2d(in, make_spec(k, Tensor(), 1, 0)),
                             doctest::Contains("channel"), std::invalid_argument);
    }
    SUBCASE("domain mismatch") {
        const Tensor k = rand_int(rng, {1, 2, 3, 3}, -3, 3);
        CHECK_THROWS_WITH_AS(conv2d(in, make_spec(k, Tensor(), 1, 0)),
                             doctest::Contains("domain"), std::invalid_argument);
    }
    SUBCASE("kernel larger than padded input") {
        const Tensor k = rand_real(rng, {1, 2, 6, 6});
        CHECK_THROWS_AS(conv2d(in, make_spec(k, Tensor(), 1, 0)), std::invalid_argument);
    }
    SUBCASE("non-4D input") {
        const Tensor flat = rand_real(rng, {4});
        const Tensor k = rand_real(rng, {1, 2, 3, 3});
        CHECK_THROWS_AS(conv2d(flat, make_spec(k, Tensor(), 1, 0)), std::invalid_argument);
    }
}

TEST_CASE("transpose_conv2d shape formula") {
    Rng rng(37);
    const Tensor in = rand_real(rng, {1, 1, 2, 2});
    const Tensor k = rand_real(rng, {1, 1, 2, 2});
    const Tensor out = transpose_conv2d(in, make_spec(k, Tensor(), 2, 0, ConvKind::TransposeConv));
    CHECK(out.shape() == std::vector<int>{1, 1, 4, 4});
}

TEST_CASE("transpose_conv2d single tap scales the kernel") {
    const double v = 2.5;
    const Tensor in = Tensor::full({1, 1, 1, 1}, v);
    const Tensor k = Tensor::from_real({1, 1, 2, 2}, {0.5, -1.0, 2.0, 0.25});
    const Tensor out = transpose_conv2d(in, make_spec(k, Tensor(), 1, 0, ConvKind::TransposeConv));
    REQUIRE(out.shape() == std::vector<int>{1, 1, 2, 2});
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(out.real()[i] == doctest::Approx(v * k.real()[i]).epsilon(1e-15));
    }
}

TEST_CASE("transpose_conv2d matches the zero-insertion oracle") {
    Rng rng(41);
    for (int it = 0; it < 60; ++it) {
        const int in_c = static_cast<int>(rng.uniform_int(1, 4));
        const int out_c = static_cast<int>(rng.uniform_int(1, 4));
        const int h = static_cast<int>(rng.uniform_int(1, 6));
        const int w = static_cast<int>(rng.uniform_int(1, 6));
        const int kh = static_cast<int>(rng.uniform_int(1, 3));
        const int kw = static_cast<int>(rng.uniform_int(1, 3));
        const int stride = static_cast<int>(rng.uniform_int(1, 3));
        // pad <= (k-1)/2 keeps the output size positive for any input size
        const int pad = static_cast<int>(rng.uniform_int(0, (std::min(kh, kw) - 1) / 2));
        const Tensor in = rand_real(rng, {1, in_c, h, w});
        const Tensor k = rand_real(rng, {out_c, in_c, kh, kw});
        const Tensor b = rand_real(rng, {out_c});
        const Tensor got =
            transpose_conv2d(in, make_spec(k, b, stride, pad, ConvKind::TransposeConv));
        const Tensor want = transpose_conv_oracle(in, k, b, stride, pad);
        REQUIRE(got.shape() == want.shape());
        CHECK(max_abs_diff(got, want) <= 1e-12);
    }
}

TEST_CASE("transpose_conv2d requires the transpose kind") {
    Rng rng(43);
    const Tensor in = rand_real(rng, {1, 1, 2, 2});
    const Tensor k = rand_real(rng, {1, 1, 2, 2});
    CHECK_THROWS_AS(transpose_conv2d(in, make_spec(k, Tensor(), 1, 0, ConvKind::Conv)),
                    std::invalid_argument);
    CHECK_THROWS_AS(conv2d(in, make_spec(k, Tensor(), 1, 0, ConvKind::TransposeConv)),
                    std::invalid_argument);
}

TEST_CASE("relu clamps negatives") {
    const Tensor in = Tensor::from_real({3}, {-1.0, 0.0, 2.0});
    const Tensor out = relu(in);
    CHECK(out.real()[0] == 0.0);
    CHECK(out.real()[1] == 0.0);
    CHECK(out.real()[2] == 2.0);

    const Tensor neg = Tensor::from_real({4}, {-5.0, -0.1, -3.0, -1e9});
    const Tensor zeroed = relu(neg);
    for (double v : zeroed.real()) CHECK(v == 0.0);
}

TEST_CASE("relu is idempotent") {
    Rng rng(47);
    const Tensor x = rand_real(rng, {2, 3, 4, 4}, -2.0, 2.0);
    const Tensor once = relu(x);
    const Tensor twice = relu(once);
    CHECK(max_abs_diff(once, twice) == 0.0);
}

TEST_CASE("tensor invariants") {
    CHECK_THROWS_AS(Tensor::from_real({2, 2}, {1.0, 2.0, 3.0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor::zeros({0, 3}), std::invalid_argument);
    const Tensor t = Tensor::zeros({2, 3});
    CHECK(t.size() == 6);
    CHECK_THROWS_AS(t.ints(), std::invalid_argument);
}
