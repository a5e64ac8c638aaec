#include "uwno/wno.hpp"

#include "uwno/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace uwno;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
    Tensor t(shape);
    for (auto& v : t.data()) v = rng.uniform(-1.0f, 1.0f);
    return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (int i = 0; i < a.numel(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
    }
    return worst;
}

WnoBlock zeroed_block(int c, int h, int w, const char* wavelet, int level) {
    Rng rng(1);
    WnoBlock b = make_wno_block(c, c, h, w, wavelet_filters(wavelet), level, false, rng);
    for (auto& v : b.kernel_weights.data()) v = 0.0f;
    for (auto& v : b.bypass_w.data()) v = 0.0f;
    for (auto& v : b.bypass_b.data()) v = 0.0f;
    return b;
}

} // namespace

TEST_CASE("identity kernel with zero bypass reproduces relu(x)") {
    Rng rng(201);
    Tensor x = random_tensor({1, 1, 16, 16}, rng);
    WnoBlock b = zeroed_block(1, 16, 16, "db4", 2);
    for (auto& v : b.kernel_weights.data()) v = 1.0f;
    Tensor y = wno_forward(x, b);
    REQUIRE(y.shape() == x.shape());
    Tensor expect = relu(x);
    CHECK(max_abs_diff(y, expect) < 1e-4);
}

TEST_CASE("zero weights annihilate inputs without detail content") {
    // a constant image lives entirely in the approximation subband, so a
    // zero kernel (details pass through unchanged) maps it to zero; FMA
    // contraction leaves sub-1e-7 residue in the detail cancellations
    Tensor x = Tensor::full({2, 1, 16, 16}, 0.8f);
    WnoBlock b = zeroed_block(1, 16, 16, "haar", 2);
    Tensor y = wno_forward(x, b);
    for (float v : y.data()) CHECK(std::abs(v) < 1e-6f);
}

TEST_CASE("zero kernel keeps exactly the pass-through detail component") {
    Rng rng(203);
    Tensor x = random_tensor({1, 2, 16, 16}, rng);
    WnoBlock b = zeroed_block(2, 16, 16, "db2", 2);
    Tensor y = wno_forward(x, b);

    CoeffPyramid p = wavedec2(x, b.filter, 2);
    CoeffPyramid no_approx = p;
    no_approx.approx = Tensor::zeros(p.approx.shape());
    Tensor expect = relu(waverec2(no_approx, b.filter));
    CHECK(max_abs_diff(y, expect) < 1e-5);
}

TEST_CASE("shape preservation and channel mismatch") {
    Rng rng(207);
    WnoBlock b = make_wno_block(8, 8, 64, 64, wavelet_filters("db4"), 2, false, rng);
    Tensor x = random_tensor({2, 8, 64, 64}, rng);
    CHECK(wno_forward(x, b).shape() == Shape{2, 8, 64, 64});
    CHECK_THROWS_AS(wno_forward(random_tensor({2, 4, 64, 64}, rng), b), std::invalid_argument);
    // block is tied to the construction-time resolution
    CHECK_THROWS_AS(wno_forward(random_tensor({2, 8, 32, 32}, rng), b), std::invalid_argument);
    CHECK_THROWS_AS(make_wno_block(4, 8, 64, 64, wavelet_filters("db4"), 2, false, rng),
                    std::invalid_argument);
}

TEST_CASE("pre-activation output is linear in the input") {
    Rng rng(211);
    WnoBlock b = make_wno_block(3, 3, 32, 32, wavelet_filters("db4"), 2, false, rng);
    Tensor x1 = random_tensor({1, 3, 32, 32}, rng);
    Tensor x2 = random_tensor({1, 3, 32, 32}, rng);
    const float a = 1.75f, c = -0.5f;

    Tensor combo(x1.shape());
    for (int i = 0; i < combo.numel(); ++i) {
        combo.data()[i] = a * x1.data()[i] + c * x2.data()[i];
    }
    Tensor lhs = wno_preactivation(combo, b);
    Tensor f1 = wno_preactivation(x1, b);
    Tensor f2 = wno_preactivation(x2, b);
    double worst = 0.0;
    for (int i = 0; i < lhs.numel(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(lhs.data()[i]) -
                                         (a * f1.data()[i] + c * f2.data()[i])));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("kernel weight locality: haar footprint is one 2^L x 2^L block") {
    Rng rng(213);
    WnoBlock b = make_wno_block(1, 1, 16, 16, wavelet_filters("haar"), 2, false, rng);
    Tensor x = random_tensor({1, 1, 16, 16}, rng);
    Tensor before = wno_preactivation(x, b);

    const int ci = 1, cj = 2;                  // coefficient at approx position (row 1, col 2)
    b.kernel_weights.data()[ci * 4 + cj] += 0.5f;
    Tensor after = wno_preactivation(x, b);

    int inside_nonzero = 0;
    for (int y = 0; y < 16; ++y) {
        for (int xc = 0; xc < 16; ++xc) {
            const float diff = after.data()[y * 16 + xc] - before.data()[y * 16 + xc];
            const bool inside = y >= 4 * ci && y < 4 * (ci + 1) && xc >= 4 * cj && xc < 4 * (cj + 1);
            if (inside) {
                inside_nonzero += diff != 0.0f;
            } else {
                CHECK(diff == 0.0f);
            }
        }
    }
    CHECK(inside_nonzero == 16);
}

TEST_CASE("gradient checks on block parameters") {
    Rng rng(217);
    Tensor x = random_tensor({1, 2, 16, 16}, rng);

    SUBCASE("kernel weights and bypass") {
        WnoBlock b = make_wno_block(2, 2, 16, 16, wavelet_filters("db4"), 2, false, rng);
        auto via_kernel = [&](const Tensor& t) {
            WnoBlock probe = b;
            probe.kernel_weights = t;
            Tensor y = wno_forward(x, probe);
            return sum(mul(y, y));
        };
        CHECK(finite_diff_check(via_kernel, b.kernel_weights, 1e-2f) < 2e-2f);

        auto via_bypass = [&](const Tensor& t) {
            WnoBlock probe = b;
            probe.bypass_w = t;
            Tensor y = wno_forward(x, probe);
            return sum(mul(y, y));
        };
        CHECK(finite_diff_check(via_bypass, b.bypass_w, 1e-2f) < 2e-2f);
    }
    SUBCASE("detail weights when mixing is enabled") {
        WnoBlock b = make_wno_block(2, 2, 16, 16, wavelet_filters("haar"), 1, true, rng);
        auto via_lh = [&](const Tensor& t) {
            WnoBlock probe = b;
            probe.detail_weights_lh = t;
            Tensor y = wno_forward(x, probe);
            return sum(mul(y, y));
        };
        CHECK(finite_diff_check(via_lh, b.detail_weights_lh, 1e-2f) < 2e-2f);
    }
}

TEST_CASE("channel_mix matches a direct loop and rejects bad shapes") {
    Rng rng(219);
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    Tensor w = random_tensor({5, 3, 4, 4}, rng);
    Tensor y = channel_mix(x, w);
    REQUIRE(y.shape() == Shape{2, 5, 4, 4});
    for (int b = 0; b < 2; ++b)
        for (int o = 0; o < 5; ++o)
            for (int i = 0; i < 16; ++i) {
                double acc = 0.0;
                for (int c = 0; c < 3; ++c) {
                    acc += static_cast<double>(w.data()[(o * 3 + c) * 16 + i]) *
                           x.data()[(b * 3 + c) * 16 + i];
                }
                CHECK(std::abs(y.data()[(b * 5 + o) * 16 + i] - acc) < 1e-5);
            }
    CHECK_THROWS_AS(channel_mix(x, random_tensor({5, 3, 2, 4}, rng)), std::invalid_argument);
}
