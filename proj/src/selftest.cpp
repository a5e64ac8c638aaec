#include "uwno/selftest.hpp"

#include "uwno/metrics.hpp"
#include "uwno/model.hpp"
#include "uwno/rng.hpp"
#include "uwno/tensor.hpp"
#include "uwno/train.hpp"
#include "uwno/wavelet.hpp"

#include <cmath>
#include <iomanip>

namespace uwno {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
    Tensor t(shape);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

double squared_norm(const Tensor& t) {
    double acc = 0.0;
    for (float v : t.data()) acc += static_cast<double>(v) * v;
    return acc;
}

bool reconstruction_suite(std::ostream& out) {
    Rng rng(1001);
    double worst = 0.0;
    for (const char* name : {"haar", "db2", "db4"}) {
        WaveletFilter f = wavelet_filters(name);
        for (int level = 1; level <= 3; ++level) {
            for (int trial = 0; trial < 10; ++trial) {
                Tensor x = random_tensor({1, 1, 64, 64}, rng);
                Tensor back = waverec2(wavedec2(x, f, level), f);
                for (int i = 0; i < x.numel(); ++i) {
                    worst = std::max(worst,
                                     std::abs(static_cast<double>(back.data()[i]) - x.data()[i]));
                }
            }
        }
    }
    const bool ok = worst < 1e-4;
    out << (ok ? "PASS" : "FAIL") << " wavelet reconstruction (max |err| = " << std::scientific
        << std::setprecision(2) << worst << ")\n";
    return ok;
}

bool parseval_suite(std::ostream& out) {
    Rng rng(1003);
    double worst = 0.0;
    for (const char* name : {"haar", "db2", "db4"}) {
        WaveletFilter f = wavelet_filters(name);
        for (int trial = 0; trial < 10; ++trial) {
            Tensor x = random_tensor({1, 2, 64, 64}, rng);
            CoeffPyramid p = wavedec2(x, f, 2);
            double energy = squared_norm(p.approx);
            for (const auto& d : p.details) {
                energy += squared_norm(d.lh) + squared_norm(d.hl) + squared_norm(d.hh);
            }
            const double in = squared_norm(x);
            worst = std::max(worst, std::abs(energy - in) / in);
        }
    }
    const bool ok = worst < 1e-4;
    out << (ok ? "PASS" : "FAIL") << " parseval energy (max rel err = " << std::scientific
        << std::setprecision(2) << worst << ")\n";
    return ok;
}

bool gradient_suite(std::ostream& out) {
    Rng rng(1005);
    float worst = 0.0f;

    {   // conv2d against finite differences
        Tensor x = random_tensor({1, 2, 6, 6}, rng);
        Tensor w = random_tensor({3, 2, 3, 3}, rng);
        Tensor b = random_tensor({3}, rng);
        auto f = [&](const Tensor& t) {
            Tensor y = conv2d(x, t, b, 1);
            return sum(mul(y, y));
        };
        worst = std::max(worst, finite_diff_check(f, w, 1e-2f));
    }
    {   // dwt adjoint: gradient of 0.5*|wavedec2|^2 equals the reconstruction
        WaveletFilter f = wavelet_filters("db4");
        Tensor x = random_tensor({1, 1, 32, 32}, rng);
        x.set_requires_grad(true);
        CoeffPyramid p = wavedec2(x, f, 2);
        Tensor total = sum(mul(p.approx, p.approx));
        for (const auto& d : p.details) {
            total = add(total, add(sum(mul(d.lh, d.lh)),
                                   add(sum(mul(d.hl, d.hl)), sum(mul(d.hh, d.hh)))));
        }
        backward(scale(total, 0.5f));
        Tensor expect = waverec2(p, f);
        float diff = 0.0f;
        for (int i = 0; i < x.numel(); ++i) {
            diff = std::max(diff, std::abs(x.grad()[i] - expect.data()[i]));
        }
        worst = std::max(worst, diff);
    }
    {   // wno kernel weights through the block
        WnoBlock block = make_wno_block(2, 2, 16, 16, wavelet_filters("db2"), 2, false, rng);
        Tensor x = random_tensor({1, 2, 16, 16}, rng);
        auto f = [&](const Tensor& t) {
            WnoBlock probe = block;
            probe.kernel_weights = t;
            Tensor y = wno_forward(x, probe);
            return sum(mul(y, y));
        };
        worst = std::max(worst, finite_diff_check(f, block.kernel_weights, 1e-3f, 8, 2));
    }
    {   // soft dice surrogate
        Tensor probs = random_tensor({1, 1, 8, 8}, rng, 0.05f, 0.95f);
        Tensor gt({1, 1, 8, 8});
        for (auto& v : gt.data()) v = rng.below(2) ? 1.0f : 0.0f;
        auto f = [&](const Tensor& t) { return soft_dice_loss(t, gt, 1.0f); };
        worst = std::max(worst, finite_diff_check(f, probs, 1e-2f));
    }

    const bool ok = worst < 2e-2f;
    out << (ok ? "PASS" : "FAIL") << " gradient checks (max rel err = " << std::scientific
        << std::setprecision(2) << worst << ")\n";
    return ok;
}

bool dice_suite(std::ostream& out) {
    Rng rng(1007);
    bool ok = true;
    for (int trial = 0; trial < 200 && ok; ++trial) {
        Tensor p({16, 16}), g({16, 16});
        for (auto& v : p.data()) v = rng.below(2) ? 1.0f : 0.0f;
        for (auto& v : g.data()) v = rng.below(2) ? 1.0f : 0.0f;
        int64_t inter = 0, total = 0;
        for (int i = 0; i < p.numel(); ++i) {
            inter += p.data()[i] != 0.0f && g.data()[i] != 0.0f;
            total += (p.data()[i] != 0.0f) + (g.data()[i] != 0.0f);
        }
        const double expect = total == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / total;
        ok = dice_score(confusion_counts(p, g)) == expect;
    }
    out << (ok ? "PASS" : "FAIL") << " dice counting oracle (200 random mask pairs)\n";
    return ok;
}

} // namespace

bool run_selftest(std::ostream& out) {
    bool ok = true;
    ok &= reconstruction_suite(out);
    ok &= parseval_suite(out);
    ok &= gradient_suite(out);
    ok &= dice_suite(out);
    out << (ok ? "self-test passed\n" : "self-test FAILED\n");
    return ok;
}

} // namespace uwno
