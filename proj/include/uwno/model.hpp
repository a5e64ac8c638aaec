#pragma once

#include "uwno/tensor.hpp"
#include "uwno/unet.hpp"
#include "uwno/wno.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace uwno {

// Full segmentation operator: a 1x1 lifting conv feeds three parallel
// branches (stacked WNO blocks, a shape-preserving two-conv branch, and a
// U-Net); their sum goes through a conv head producing 1-channel logits.
struct UwnoConfig {
    int channels = 16;            // lifted width, shared by all branches
    int wno_blocks = 2;
    std::string wavelet = "db4";
    int level = 2;                // wavelet decomposition depth per block
    int unet_depth = 3;
    int height = 128;
    int width = 128;
    uint64_t seed = 0;

    UnetConfig unet_config() const {
        return UnetConfig{unet_depth, channels, channels, channels};
    }
};

struct UwnoParams {
    Tensor lift_w, lift_b;                     // 1x1, 1 -> C
    std::vector<WnoBlock> wno;
    Tensor branch_w1, branch_b1, branch_w2, branch_b2;   // 3x3, C -> C
    UnetParams unet;
    Tensor head_w1, head_b1;                   // 3x3, C -> C
    Tensor head_w2, head_b2;                   // 1x1, C -> 1
};

// Deterministic in cfg.seed: the same seed yields bitwise-identical
// parameters.
UwnoParams make_uwno_params(const UwnoConfig& cfg);

Tensor uwno_forward(const Tensor& image, const UwnoParams& p, const UwnoConfig& cfg);

// mask = 1 where sigmoid(logits) >= 0.5 (so zero logits map to foreground)
Tensor mask_from_logits(const Tensor& logits);
Tensor predict_mask(const Tensor& image, const UwnoParams& p, const UwnoConfig& cfg);

// Stable traversal order; names are the checkpoint keys.
void for_each_param(UwnoParams& p,
                    const std::function<void(const std::string&, Tensor&)>& fn);

} // namespace uwno
