#include "uwno/unet.hpp"

#include <cmath>
#include <stdexcept>

namespace uwno {

Tensor he_conv_weight(int cout, int cin, int k, Rng& rng) {
    Tensor w({cout, cin, k, k});
    const float std_dev = std::sqrt(2.0f / static_cast<float>(cin * k * k));
    for (auto& v : w.data()) v = std_dev * rng.normal();
    w.set_requires_grad(true);
    return w;
}

namespace {

Tensor zero_bias(int c) {
    Tensor b({c});
    b.set_requires_grad(true);
    return b;
}

DoubleConvParams make_double_conv(int cin, int cout, Rng& rng) {
    DoubleConvParams p;
    p.w1 = he_conv_weight(cout, cin, 3, rng);
    p.b1 = zero_bias(cout);
    p.w2 = he_conv_weight(cout, cout, 3, rng);
    p.b2 = zero_bias(cout);
    return p;
}

} // namespace

UnetParams make_unet_params(const UnetConfig& cfg, Rng& rng) {
    if (cfg.depth < 1 || cfg.base_channels < 1 || cfg.in_channels < 1 || cfg.out_channels < 1) {
        throw std::invalid_argument("make_unet_params: all config fields must be positive");
    }
    UnetParams p;
    int cin = cfg.in_channels;
    for (int l = 0; l < cfg.depth; ++l) {
        const int cout = cfg.base_channels << l;
        p.encoder.push_back(make_double_conv(cin, cout, rng));
        cin = cout;
    }
    p.bottleneck = make_double_conv(cin, cfg.base_channels << cfg.depth, rng);

    p.decoder.resize(static_cast<size_t>(cfg.depth));
    for (int l = cfg.depth - 1; l >= 0; --l) {
        const int level_ch = cfg.base_channels << l;
        DecoderLevelParams d;
        d.up_w = he_conv_weight(level_ch, level_ch * 2, 3, rng);
        d.up_b = zero_bias(level_ch);
        d.conv = make_double_conv(level_ch * 2, level_ch, rng);
        p.decoder[static_cast<size_t>(l)] = std::move(d);
    }

    p.head_w = he_conv_weight(cfg.out_channels, cfg.base_channels, 1, rng);
    p.head_b = zero_bias(cfg.out_channels);
    return p;
}

Tensor double_conv(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                   const Tensor& b2) {
    return relu(conv2d(relu(conv2d(x, w1, b1, 1)), w2, b2, 1));
}

Tensor double_conv(const Tensor& x, const DoubleConvParams& p) {
    return double_conv(x, p.w1, p.b1, p.w2, p.b2);
}

Tensor unet_forward(const Tensor& x, const UnetParams& p, const UnetConfig& cfg,
                    bool use_skips) {
    if (x.shape().size() != 4) {
        throw std::invalid_argument("unet_forward expects [B,C,H,W], got " +
                                    shape_str(x.shape()));
    }
    const int factor = 1 << cfg.depth;
    if (x.dim(2) % factor != 0 || x.dim(3) % factor != 0) {
        throw std::invalid_argument("unet_forward: spatial dims of " + shape_str(x.shape()) +
                                    " not divisible by 2^" + std::to_string(cfg.depth));
    }

    std::vector<Tensor> skips;
    Tensor cur = x;
    for (int l = 0; l < cfg.depth; ++l) {
        cur = double_conv(cur, p.encoder[static_cast<size_t>(l)]);
        skips.push_back(cur);
        cur = max_pool2d(cur);
    }
    cur = double_conv(cur, p.bottleneck);

    for (int l = cfg.depth - 1; l >= 0; --l) {
        const DecoderLevelParams& d = p.decoder[static_cast<size_t>(l)];
        cur = relu(conv2d(upsample_nearest2d(cur), d.up_w, d.up_b, 1));
        Tensor skip = use_skips ? skips[static_cast<size_t>(l)]
                                : Tensor::zeros(skips[static_cast<size_t>(l)].shape());
        cur = concat_channels(skip, cur);
        cur = double_conv(cur, d.conv);
    }
    return conv2d(cur, p.head_w, p.head_b, 0);
}

void for_each_param(UnetParams& p,
                    const std::function<void(const std::string&, Tensor&)>& fn) {
    for (size_t l = 0; l < p.encoder.size(); ++l) {
        const std::string base = "enc" + std::to_string(l);
        fn(base + ".w1", p.encoder[l].w1);
        fn(base + ".b1", p.encoder[l].b1);
        fn(base + ".w2", p.encoder[l].w2);
        fn(base + ".b2", p.encoder[l].b2);
    }
    fn("bottleneck.w1", p.bottleneck.w1);
    fn("bottleneck.b1", p.bottleneck.b1);
    fn("bottleneck.w2", p.bottleneck.w2);
    fn("bottleneck.b2", p.bottleneck.b2);
    for (size_t l = 0; l < p.decoder.size(); ++l) {
        const std::string base = "dec" + std::to_string(l);
        fn(base + ".up_w", p.decoder[l].up_w);
        fn(base + ".up_b", p.decoder[l].up_b);
        fn(base + ".w1", p.decoder[l].conv.w1);
        fn(base + ".b1", p.decoder[l].conv.b1);
        fn(base + ".w2", p.decoder[l].conv.w2);
        fn(base + ".b2", p.decoder[l].conv.b2);
    }
    fn("head.w", p.head_w);
    fn("head.b", p.head_b);
}

} // namespace uwno
