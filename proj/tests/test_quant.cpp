#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qsnn/quant.hpp"
#include "test_util.hpp"

#include <stdexcept>

using namespace qsnn;
using namespace qsnn::test;

TEST_CASE("calibrate_qparams scale rule") {
    const Tensor a = Tensor::from_real({3}, {0.4, -1.27, 0.9});
    CHECK(calibrate_qparams(a, 8).scale == doctest::Approx(0.01).epsilon(1e-12));

    const Tensor b = Tensor::from_real({2}, {0.7, -0.35});
    CHECK(calibrate_qparams(b, 4).scale == doctest::Approx(0.1).epsilon(1e-12));

    const Tensor zero = Tensor::zeros({5});
    CHECK(calibrate_qparams(zero, 4).scale == 1.0);

    CHECK_THROWS_AS(calibrate_qparams(a, 1), std::invalid_argument);
    CHECK_THROWS_AS(calibrate_qparams(a, 9), std::invalid_argument);
}

TEST_CASE("quantize rounds half away from zero and saturates") {
    QuantParams qp{8, 0.1};
    CHECK(quantize(0.25, qp) == 3);
    CHECK(quantize(-0.05, qp) == -1);
    CHECK(quantize(0.0, qp) == 0);

    QuantParams fine{8, 0.01};
    CHECK(quantize(10.0, fine) == 127);
    CHECK(quantize(-10.0, fine) == -127);
}

TEST_CASE("quantize is monotone non-decreasing") {
    QuantParams qp{5, 0.037};
    Rng rng(3);
    for (int it = 0; it < 500; ++it) {
        const double x = rng.uniform(-2.0, 2.0);
        const double y = x + rng.uniform(0.0, 1.0);
        CHECK(quantize(x, qp) <= quantize(y, qp));
    }
}

TEST_CASE("dequantize and round-trip bounds") {
    QuantParams qp{8, 0.1};
    CHECK(dequantize(3, qp) == doctest::Approx(0.3).epsilon(1e-15));

    // Every in-range code is a fixed point of quantize(dequantize(.)).
    for (std::int32_t c = qp.qmin(); c <= qp.qmax(); ++c) {
        CHECK(quantize(dequantize(c, qp), qp) == c);
    }

    Rng rng(5);
    for (int it = 0; it < 500; ++it) {
        const double x = rng.uniform(-qp.range(), qp.range());
        CHECK(std::fabs(dequantize(quantize(x, qp), qp) - x) <= qp.scale / 2 + 1e-15);
    }
}

TEST_CASE("fake_quant lands on the grid and is idempotent") {
    QuantParams qp{8, 0.1};
    const Tensor x = Tensor::from_real({1}, {0.26});
    CHECK(fake_quant(x, qp).real()[0] == doctest::Approx(0.3).epsilon(1e-12));

    Rng rng(7);
    const Tensor r = rand_real(rng, {64}, -12.0, 12.0);
    const Tensor once = fake_quant(r, qp);
    const Tensor twice = fake_quant(once, qp);
    CHECK(max_abs_diff(once, twice) == 0.0);

    // On-grid input returns itself exactly.
    Tensor grid = Tensor::zeros({11});
    for (int i = 0; i < 11; ++i) grid.real()[i] = (i - 5) * qp.scale;
    CHECK(max_abs_diff(fake_quant(grid, qp), grid) == 0.0);
}

TEST_CASE("qrelu clamps, quantizes, and fits the bit width") {
    const double ceiling = 1.0;
    const QuantParams qp = qparams_for_ceiling(ceiling, 8);

    const Tensor x = Tensor::from_real({3}, {-0.5, ceiling + 1.0, 0.26});
    const Tensor y = qrelu(x, qp, ceiling);
    CHECK(y.real()[0] == 0.0);
    CHECK(y.real()[1] == doctest::Approx(ceiling).epsilon(1e-12));

    // scale 0.1 grid via a ceiling of 12.7
    const QuantParams tenth = qparams_for_ceiling(12.7, 8);
    const Tensor z = qrelu(Tensor::from_real({1}, {0.26}), tenth, 12.7);
    CHECK(z.real()[0] == doctest::Approx(0.3).epsilon(1e-12));

    Rng rng(9);
    const Tensor r = rand_real(rng, {256}, -3.0, 3.0);
    const Tensor q = qrelu(r, qp, ceiling);
    for (double v : q.real()) {
        CHECK(v >= 0.0);
        CHECK(v <= ceiling);
        const std::int32_t code = quantize(v, qp);
        CHECK(code >= qp.qmin());
        CHECK(code <= qp.qmax());
    }
}

TEST_CASE("fold_batchnorm unit cases") {
    ConvSpec conv;
    conv.kernel = Tensor::full({1, 1, 1, 1}, 2.0);
    conv.bias = Tensor::zeros({1});

    SUBCASE("unit variance pass-through") {
        BatchNormSpec bn{{1.0}, {1.0}, {0.0}, {1.0}, 0.0};
        const ConvSpec folded = fold_batchnorm(conv, bn);
        CHECK(folded.kernel.real()[0] == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(folded.bias.real()[0] == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("zero gain collapses to beta") {
        BatchNormSpec bn{{0.0}, {0.7}, {0.3}, {2.0}, 1e-5};
        const ConvSpec folded = fold_batchnorm(conv, bn);
        CHECK(folded.kernel.real()[0] == 0.0);
        CHECK(folded.bias.real()[0] == doctest::Approx(0.7).epsilon(1e-15));
    }
    SUBCASE("channel mismatch errors") {
        BatchNormSpec bn{{1.0, 1.0}, {0.0, 0.0}, {0.0, 0.0}, {1.0, 1.0}, 1e-5};
        CHECK_THROWS_WITH_AS(fold_batchnorm(conv, bn), doctest::Contains("channel"),
                             std::invalid_argument);
    }
}

TEST_CASE("fold_batchnorm equals the unfolded conv+bn pipeline") {
    Rng rng(13);
    for (int it = 0; it < 100; ++it) {
        const int in_c = static_cast<int>(rng.uniform_int(1, 3));
        const int out_c = static_cast<int>(rng.uniform_int(1, 4));
        ConvSpec conv;
        conv.kernel = rand_real(rng, {out_c, in_c, 3, 3});
        conv.bias = rand_real(rng, {out_c});
        conv.stride = static_cast<int>(rng.uniform_int(1, 2));
        conv.padding = 1;

        BatchNormSpec bn;
        for (int c = 0; c < out_c; ++c) {
            bn.gamma.push_back(rng.uniform(0.2, 2.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0));
            bn.beta.push_back(rng.uniform(-1.0, 1.0));
            bn.running_mean.push_back(rng.uniform(-1.0, 1.0));
            bn.running_var.push_back(rng.uniform(0.05, 3.0));
        }
        bn.epsilon = 1e-5;

        const Tensor x = rand_real(rng, {1, in_c, 6, 6});
        const Tensor unfolded = apply_batchnorm(conv2d(x, conv), bn);
        const Tensor folded = conv2d(x, fold_batchnorm(conv, bn));

        auto u = unfolded.real();
        auto f = folded.real();
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double denom = std::max(1.0, std::fabs(u[i]));
            CHECK(std::fabs(u[i] - f[i]) / denom <= 1e-9);
        }
    }
}
