#pragma once

#include "uwno/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace uwno {

// Orthonormal analysis/synthesis filter bank. Analysis is correlation with
// dec_* followed by even-index decimation:
//
//   approx[k] = sum_n dec_lo[n] * x[(2k + n) mod N]
//
// Synthesis zero-upsamples each band and scatters through rec_*:
//
//   x[(2k + n) mod N] += approx[k] * rec_lo[n] + detail[k] * rec_hi[n]
//
// With orthonormal filters the synthesis operator is the transpose of the
// analysis operator, so rec_lo/rec_hi hold the same taps as dec_lo/dec_hi
// under this convention; they are kept as separate fields because the pair
// is what defines the inverse transform.
struct WaveletFilter {
    std::string name;
    std::vector<double> dec_lo;
    std::vector<double> dec_hi;
    std::vector<double> rec_lo;
    std::vector<double> rec_hi;

    int length() const { return static_cast<int>(dec_lo.size()); }
};

// Built-in family members: "haar" (2 taps), "db2" (4 taps, 2 vanishing
// moments), "db4" (8 taps, 4 vanishing moments). Unknown names throw.
// The embedded constants are re-validated against the sum/energy/QMF
// identities on every lookup.
WaveletFilter wavelet_filters(const std::string& name);

// Single-level periodic transforms on rank-1 tensors of even length N >= taps.
std::pair<Tensor, Tensor> dwt1d_periodic(const Tensor& x, const WaveletFilter& f);
Tensor idwt1d_periodic(const Tensor& approx, const Tensor& detail, const WaveletFilter& f);

// One 2D level, separable: width axis first, then height axis on each band.
// Band names give the filter per axis, width letter first: lh is low-pass
// along width and high-pass along height.
struct Bands2d {
    Tensor ll, lh, hl, hh;
};

Bands2d dwt2d(const Tensor& x, const WaveletFilter& f);
Tensor idwt2d(const Bands2d& bands, const WaveletFilter& f);
Tensor idwt2d(const Tensor& ll, const Tensor& lh, const Tensor& hl, const Tensor& hh,
              const WaveletFilter& f);

struct DetailBands {
    Tensor lh, hl, hh;
};

// Multilevel decomposition: details[l] holds the level-(l+1) bands at
// spatial dims H/2^(l+1); approx is the final level-L approximation.
struct CoeffPyramid {
    int levels = 0;
    Tensor approx;
    std::vector<DetailBands> details;
};

CoeffPyramid wavedec2(const Tensor& x, const WaveletFilter& f, int levels);
Tensor waverec2(const CoeffPyramid& p, const WaveletFilter& f);

} // namespace uwno
