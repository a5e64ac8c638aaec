#pragma once

#include "uwno/rng.hpp"
#include "uwno/tensor.hpp"

#include <functional>
#include <string>
#include <vector>

namespace uwno {

// Compact encoder-decoder producing a shape-preserving feature map. Encoder
// level l emits base_channels * 2^l channels; the decoder mirrors it with
// nearest-neighbour upsampling, a channel-halving 3x3 conv, concatenation
// with the matching encoder activation and a double conv.
struct UnetConfig {
    int depth = 3;
    int base_channels = 16;
    int in_channels = 16;
    int out_channels = 16;
};

struct DoubleConvParams {
    Tensor w1, b1, w2, b2;
};

struct DecoderLevelParams {
    Tensor up_w, up_b;       // 3x3 conv applied after upsampling
    DoubleConvParams conv;   // after concatenation with the skip
};

struct UnetParams {
    std::vector<DoubleConvParams> encoder;    // index = level, 0 at full res
    DoubleConvParams bottleneck;
    std::vector<DecoderLevelParams> decoder;  // index = level, 0 at full res
    Tensor head_w, head_b;                    // final 1x1 projection
};

UnetParams make_unet_params(const UnetConfig& cfg, Rng& rng);

// relu(conv3x3(relu(conv3x3(x)))), padding 1: spatial dims preserved.
Tensor double_conv(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                   const Tensor& b2);
Tensor double_conv(const Tensor& x, const DoubleConvParams& p);

// use_skips=false concatenates zeros instead of the encoder activations;
// diagnostic wiring used to show the skip connections carry signal.
Tensor unet_forward(const Tensor& x, const UnetParams& p, const UnetConfig& cfg,
                    bool use_skips = true);

// He-normal conv weight [cout, cin, k, k] with requires_grad set.
Tensor he_conv_weight(int cout, int cin, int k, Rng& rng);

void for_each_param(UnetParams& p,
                    const std::function<void(const std::string&, Tensor&)>& fn);

} // namespace uwno
