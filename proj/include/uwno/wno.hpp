#pragma once

#include "uwno/rng.hpp"
#include "uwno/tensor.hpp"
#include "uwno/wavelet.hpp"

namespace uwno {

// Wavelet-domain operator block: decompose the input, mix channels of the
// deepest approximation subband through a learned per-coefficient weight
// field, reconstruct, and add a pointwise-convolution bypass.
//
// kernel_weights is [Cout, Cin, H/2^L, W/2^L] and is tied to the spatial
// size the block was built for. Detail subbands pass through unchanged
// unless mix_details is set, in which case the level-L detail bands get
// their own weight fields of the same shape.
struct WnoBlock {
    WaveletFilter filter;
    int level = 1;
    bool mix_details = false;

    Tensor kernel_weights;
    Tensor bypass_w;   // [Cout, Cin, 1, 1]
    Tensor bypass_b;   // [Cout]

    Tensor detail_weights_lh;
    Tensor detail_weights_hl;
    Tensor detail_weights_hh;

    int in_channels() const { return kernel_weights.dim(1); }
    int out_channels() const { return kernel_weights.dim(0); }
};

// Builds a block for inputs of spatial size h x w. Kernel fields start as
// small positive uniforms scaled by 1/(cin*cout); the bypass is He-normal
// with zero bias. cin must equal cout unless the detail bands are mixed too.
WnoBlock make_wno_block(int cin, int cout, int h, int w, const WaveletFilter& filter, int level,
                        bool mix_details, Rng& rng);

// Kernel path plus bypass, before the activation. Linear in x.
Tensor wno_preactivation(const Tensor& x, const WnoBlock& block);

// relu(wno_preactivation(x, block))
Tensor wno_forward(const Tensor& x, const WnoBlock& block);

// out[b,o,i,j] = sum_c weights[o,c,i,j] * x[b,c,i,j]
Tensor channel_mix(const Tensor& x, const Tensor& weights);

} // namespace uwno
