#include "uwno/wno.hpp"

#include <cmath>
#include <stdexcept>

namespace uwno {

Tensor channel_mix(const Tensor& x, const Tensor& weights) {
    if (x.shape().size() != 4 || weights.shape().size() != 4) {
        throw std::invalid_argument("channel_mix expects [B,C,h,w] and [O,C,h,w] tensors");
    }
    const int batch = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int cout = weights.dim(0);
    if (weights.dim(1) != cin || weights.dim(2) != h || weights.dim(3) != w) {
        throw std::invalid_argument("channel_mix: weight field " + shape_str(weights.shape()) +
                                    " does not match coefficients " + shape_str(x.shape()));
    }
    const int plane = h * w;
    std::vector<float> out(static_cast<size_t>(batch) * cout * plane, 0.0f);
    const float* xv = x.data().data();
    const float* wv = weights.data().data();
    for (int b = 0; b < batch; ++b) {
        for (int o = 0; o < cout; ++o) {
            float* dst = out.data() + (static_cast<size_t>(b) * cout + o) * plane;
            for (int c = 0; c < cin; ++c) {
                const float* xp = xv + (static_cast<size_t>(b) * cin + c) * plane;
                const float* wp = wv + (static_cast<size_t>(o) * cin + c) * plane;
                for (int i = 0; i < plane; ++i) dst[i] += wp[i] * xp[i];
            }
        }
    }

    auto bw = [batch, cin, cout, plane](detail::TensorNode& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        const float* dy = self.grad.data();
        if (xn.needs_grad) {
            auto& dx = xn.grad_buffer();
            for (int b = 0; b < batch; ++b) {
                for (int o = 0; o < cout; ++o) {
                    const float* g = dy + (static_cast<size_t>(b) * cout + o) * plane;
                    for (int c = 0; c < cin; ++c) {
                        float* dst = dx.data() + (static_cast<size_t>(b) * cin + c) * plane;
                        const float* wp =
                            wn.value.data() + (static_cast<size_t>(o) * cin + c) * plane;
                        for (int i = 0; i < plane; ++i) dst[i] += wp[i] * g[i];
                    }
                }
            }
        }
        if (wn.needs_grad) {
            auto& dw = wn.grad_buffer();
            for (int b = 0; b < batch; ++b) {
                for (int o = 0; o < cout; ++o) {
                    const float* g = dy + (static_cast<size_t>(b) * cout + o) * plane;
                    for (int c = 0; c < cin; ++c) {
                        float* dst = dw.data() + (static_cast<size_t>(o) * cin + c) * plane;
                        const float* xp =
                            xn.value.data() + (static_cast<size_t>(b) * cin + c) * plane;
                        for (int i = 0; i < plane; ++i) dst[i] += xp[i] * g[i];
                    }
                }
            }
        }
    };
    return detail::make_op({batch, cout, h, w}, std::move(out), {x, weights}, std::move(bw),
                           "channel_mix");
}

namespace {

Tensor kernel_field(int cout, int cin, int h, int w, Rng& rng) {
    Tensor t({cout, cin, h, w});
    const float s = 1.0f / (static_cast<float>(cin) * static_cast<float>(cout));
    for (auto& v : t.data()) v = rng.uniform(0.0f, s);
    t.set_requires_grad(true);
    return t;
}

} // namespace

WnoBlock make_wno_block(int cin, int cout, int h, int w, const WaveletFilter& filter, int level,
                        bool mix_details, Rng& rng) {
    if (cin < 1 || cout < 1 || level < 1) {
        throw std::invalid_argument("make_wno_block: channels and level must be positive");
    }
    const int factor = 1 << level;
    if (h % factor != 0 || w % factor != 0) {
        throw std::invalid_argument("make_wno_block: spatial size " + std::to_string(h) + "x" +
                                    std::to_string(w) + " not divisible by 2^" +
                                    std::to_string(level));
    }
    if (cin != cout && !mix_details) {
        throw std::invalid_argument(
            "make_wno_block: cin must equal cout when detail bands pass through unchanged");
    }
    WnoBlock b;
    b.filter = filter;
    b.level = level;
    b.mix_details = mix_details;
    const int ch = h / factor, cw = w / factor;
    b.kernel_weights = kernel_field(cout, cin, ch, cw, rng);
    if (mix_details) {
        b.detail_weights_lh = kernel_field(cout, cin, ch, cw, rng);
        b.detail_weights_hl = kernel_field(cout, cin, ch, cw, rng);
        b.detail_weights_hh = kernel_field(cout, cin, ch, cw, rng);
    }
    b.bypass_w = Tensor({cout, cin, 1, 1});
    const float std_dev = std::sqrt(2.0f / static_cast<float>(cin));
    for (auto& v : b.bypass_w.data()) v = std_dev * rng.normal();
    b.bypass_w.set_requires_grad(true);
    b.bypass_b = Tensor({cout});
    b.bypass_b.set_requires_grad(true);
    return b;
}

Tensor wno_preactivation(const Tensor& x, const WnoBlock& block) {
    if (x.shape().size() != 4) {
        throw std::invalid_argument("wno_forward expects [B,C,H,W], got " +
                                    shape_str(x.shape()));
    }
    if (x.dim(1) != block.in_channels()) {
        throw std::invalid_argument("wno_forward: block expects " +
                                    std::to_string(block.in_channels()) +
                                    " channels, input has " + std::to_string(x.dim(1)));
    }
    CoeffPyramid p = wavedec2(x, block.filter, block.level);
    if (p.approx.dim(2) != block.kernel_weights.dim(2) ||
        p.approx.dim(3) != block.kernel_weights.dim(3)) {
        throw std::invalid_argument("wno_forward: block was built for approximation dims " +
                                    std::to_string(block.kernel_weights.dim(2)) + "x" +
                                    std::to_string(block.kernel_weights.dim(3)) + ", input " +
                                    shape_str(x.shape()) + " yields " +
                                    std::to_string(p.approx.dim(2)) + "x" +
                                    std::to_string(p.approx.dim(3)));
    }

    CoeffPyramid mixed = p;
    mixed.approx = channel_mix(p.approx, block.kernel_weights);
    if (block.mix_details) {
        DetailBands& deepest = mixed.details.back();
        deepest.lh = channel_mix(deepest.lh, block.detail_weights_lh);
        deepest.hl = channel_mix(deepest.hl, block.detail_weights_hl);
        deepest.hh = channel_mix(deepest.hh, block.detail_weights_hh);
    }
    Tensor kernel_path = waverec2(mixed, block.filter);
    return add(kernel_path, conv2d(x, block.bypass_w, block.bypass_b, 0));
}

Tensor wno_forward(const Tensor& x, const WnoBlock& block) {
    return relu(wno_preactivation(x, block));
}

} // namespace uwno
