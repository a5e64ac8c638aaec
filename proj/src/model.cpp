#include "uwno/model.hpp"

#include "uwno/rng.hpp"
#include "uwno/wavelet.hpp"

#include <algorithm>
#include <stdexcept>

namespace uwno {

namespace {

void validate_config(const UwnoConfig& cfg) {
    if (cfg.channels < 1 || cfg.wno_blocks < 0 || cfg.level < 1 || cfg.unet_depth < 1 ||
        cfg.height < 1 || cfg.width < 1) {
        throw std::invalid_argument("uwno config fields must be positive");
    }
    const int need = std::max(cfg.wno_blocks > 0 ? cfg.level : 0, cfg.unet_depth);
    const int factor = 1 << need;
    if (cfg.height % factor != 0 || cfg.width % factor != 0) {
        throw std::invalid_argument("uwno config: " + std::to_string(cfg.height) + "x" +
                                    std::to_string(cfg.width) + " not divisible by 2^" +
                                    std::to_string(need));
    }
}

Tensor zero_bias(int c) {
    Tensor b({c});
    b.set_requires_grad(true);
    return b;
}

} // namespace

UwnoParams make_uwno_params(const UwnoConfig& cfg) {
    validate_config(cfg);
    Rng rng(cfg.seed);
    const int c = cfg.channels;
    WaveletFilter filter = wavelet_filters(cfg.wavelet);

    UwnoParams p;
    p.lift_w = he_conv_weight(c, 1, 1, rng);
    p.lift_b = zero_bias(c);
    for (int i = 0; i < cfg.wno_blocks; ++i) {
        p.wno.push_back(
            make_wno_block(c, c, cfg.height, cfg.width, filter, cfg.level, false, rng));
    }
    p.branch_w1 = he_conv_weight(c, c, 3, rng);
    p.branch_b1 = zero_bias(c);
    p.branch_w2 = he_conv_weight(c, c, 3, rng);
    p.branch_b2 = zero_bias(c);
    p.unet = make_unet_params(cfg.unet_config(), rng);
    p.head_w1 = he_conv_weight(c, c, 3, rng);
    p.head_b1 = zero_bias(c);
    // the logit projection starts at a tenth of the He scale: initial logits
    // near zero keep sigmoid gradients alive everywhere, which the dice
    // surrogate needs to stay out of the saturated all-background state
    p.head_w2 = he_conv_weight(1, c, 1, rng);
    for (auto& v : p.head_w2.data()) v *= 0.1f;
    p.head_b2 = zero_bias(1);
    return p;
}

Tensor uwno_forward(const Tensor& image, const UwnoParams& p, const UwnoConfig& cfg) {
    if (image.shape().size() != 4 || image.dim(1) != 1) {
        throw std::invalid_argument("uwno_forward expects [B,1,H,W], got " +
                                    shape_str(image.shape()));
    }
    if (image.dim(2) != cfg.height || image.dim(3) != cfg.width) {
        throw std::invalid_argument("uwno_forward: model built for " +
                                    std::to_string(cfg.height) + "x" +
                                    std::to_string(cfg.width) + ", got " +
                                    shape_str(image.shape()));
    }

    Tensor z = conv2d(image, p.lift_w, p.lift_b, 0);

    Tensor x1 = z;
    for (const WnoBlock& block : p.wno) x1 = wno_forward(x1, block);

    Tensor x2 = relu(conv2d(relu(conv2d(z, p.branch_w1, p.branch_b1, 1)),
                            p.branch_w2, p.branch_b2, 1));

    Tensor x3 = unet_forward(z, p.unet, cfg.unet_config());

    Tensor fused = add(add(x1, x2), x3);
    return conv2d(relu(conv2d(fused, p.head_w1, p.head_b1, 1)), p.head_w2, p.head_b2, 0);
}

Tensor mask_from_logits(const Tensor& logits) {
    Tensor mask(logits.shape());
    for (int i = 0; i < logits.numel(); ++i) {
        // sigmoid(v) >= 0.5  <=>  v >= 0
        mask.data()[static_cast<size_t>(i)] =
            logits.data()[static_cast<size_t>(i)] >= 0.0f ? 1.0f : 0.0f;
    }
    return mask;
}

Tensor predict_mask(const Tensor& image, const UwnoParams& p, const UwnoConfig& cfg) {
    NoGradGuard no_grad;
    return mask_from_logits(uwno_forward(image, p, cfg));
}

void for_each_param(UwnoParams& p,
                    const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("lift.w", p.lift_w);
    fn("lift.b", p.lift_b);
    for (size_t i = 0; i < p.wno.size(); ++i) {
        const std::string base = "wno" + std::to_string(i);
        fn(base + ".kernel", p.wno[i].kernel_weights);
        if (p.wno[i].mix_details) {
            fn(base + ".detail_lh", p.wno[i].detail_weights_lh);
            fn(base + ".detail_hl", p.wno[i].detail_weights_hl);
            fn(base + ".detail_hh", p.wno[i].detail_weights_hh);
        }
        fn(base + ".bypass_w", p.wno[i].bypass_w);
        fn(base + ".bypass_b", p.wno[i].bypass_b);
    }
    fn("branch.w1", p.branch_w1);
    fn("branch.b1", p.branch_b1);
    fn("branch.w2", p.branch_w2);
    fn("branch.b2", p.branch_b2);
    for_each_param(p.unet, [&](const std::string& name, Tensor& t) { fn("unet." + name, t); });
    fn("head.w1", p.head_w1);
    fn("head.b1", p.head_b1);
    fn("head.w2", p.head_w2);
    fn("head.b2", p.head_b2);
}

} // namespace uwno
