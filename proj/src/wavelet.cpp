#include "uwno/wavelet.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace uwno {

namespace {

// Daubechies scaling filters, minimum phase, normalized to sum sqrt(2).
const double kHaar[2] = {0.70710678118654752440, 0.70710678118654752440};

const double kDb2[4] = {0.48296291314469025, 0.8365163037378079,
                        0.22414386804185735, -0.12940952255092145};

const double kDb4[8] = {0.23037781330885523,   0.7148465705525415,
                        0.6308807679295904,    -0.02798376941698385,
                        -0.18703481171888114,  0.030841381835986965,
                        0.032883011666982945,  -0.010597401784997278};

void validate_filter(const WaveletFilter& f) {
    const int n = f.length();
    double s = 0.0, s2 = 0.0;
    for (double v : f.dec_lo) {
        s += v;
        s2 += v * v;
    }
    if (std::abs(s - std::sqrt(2.0)) > 1e-6 || std::abs(s2 - 1.0) > 1e-6) {
        throw std::logic_error("wavelet filter table for '" + f.name +
                               "' violates the sum/energy identities");
    }
    for (int i = 0; i < n; ++i) {
        const double qmf = (i % 2 == 0 ? 1.0 : -1.0) * f.dec_lo[static_cast<size_t>(n - 1 - i)];
        if (std::abs(f.dec_hi[static_cast<size_t>(i)] - qmf) > 1e-12) {
            throw std::logic_error("wavelet filter table for '" + f.name +
                                   "' violates the quadrature-mirror relation");
        }
    }
}

WaveletFilter build_filter(const std::string& name, const double* lo, int n) {
    WaveletFilter f;
    f.name = name;
    f.dec_lo.assign(lo, lo + n);
    f.dec_hi.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        f.dec_hi[static_cast<size_t>(i)] =
            (i % 2 == 0 ? 1.0 : -1.0) * lo[n - 1 - i];
    }
    f.rec_lo = f.dec_lo;
    f.rec_hi = f.dec_hi;
    validate_filter(f);
    return f;
}

struct Taps {
    std::vector<float> lo, hi;
    int len;
};

Taps analysis_taps(const WaveletFilter& f) {
    Taps t;
    t.len = f.length();
    t.lo.assign(f.dec_lo.begin(), f.dec_lo.end());
    t.hi.assign(f.dec_hi.begin(), f.dec_hi.end());
    return t;
}

Taps synthesis_taps(const WaveletFilter& f) {
    Taps t;
    t.len = f.length();
    t.lo.assign(f.rec_lo.begin(), f.rec_lo.end());
    t.hi.assign(f.rec_hi.begin(), f.rec_hi.end());
    return t;
}

// ---- core periodic kernels --------------------------------------------------
// All kernels view the data as `rows` contiguous signals of length n when
// working along the width axis, or as H signal rows of `width` interleaved
// columns when working along the height axis.

// Width-axis kernels split the signal into even/odd phases so every filter
// tap becomes a contiguous multiply-accumulate over the decimated index:
//   a[k] = sum_t lo[2t] * x_even[k+t] + sum_t lo[2t+1] * x_odd[k+t]
// with the phases periodically extended by half the filter length.
void analyze_w(const float* x, int rows, int n, const Taps& t, float* a, float* d) {
    const int half = n / 2;
    const int phase_taps = t.len / 2;          // filters have even length
    std::vector<float> even(static_cast<size_t>(half + phase_taps));
    std::vector<float> odd(even.size());
    for (int r = 0; r < rows; ++r) {
        const float* xr = x + static_cast<size_t>(r) * n;
        float* ar = a + static_cast<size_t>(r) * half;
        float* dr = d + static_cast<size_t>(r) * half;
        for (int j = 0; j < half; ++j) {
            even[static_cast<size_t>(j)] = xr[2 * j];
            odd[static_cast<size_t>(j)] = xr[2 * j + 1];
        }
        for (int j = 0; j < phase_taps; ++j) {
            even[static_cast<size_t>(half + j)] = even[static_cast<size_t>(j % half)];
            odd[static_cast<size_t>(half + j)] = odd[static_cast<size_t>(j % half)];
        }
        std::fill(ar, ar + half, 0.0f);
        std::fill(dr, dr + half, 0.0f);
        for (int tap = 0; tap < phase_taps; ++tap) {
            const float lo_e = t.lo[static_cast<size_t>(2 * tap)];
            const float lo_o = t.lo[static_cast<size_t>(2 * tap + 1)];
            const float hi_e = t.hi[static_cast<size_t>(2 * tap)];
            const float hi_o = t.hi[static_cast<size_t>(2 * tap + 1)];
            const float* ev = even.data() + tap;
            const float* od = odd.data() + tap;
            for (int k = 0; k < half; ++k) {
                ar[k] += lo_e * ev[k] + lo_o * od[k];
                dr[k] += hi_e * ev[k] + hi_o * od[k];
            }
        }
    }
}

// scatter one band through one synthesis filter, accumulating into out
void synth_band_w(const float* band, int rows, int n, const std::vector<float>& taps, int len,
                  float* out) {
    const int half = n / 2;
    const int phase_taps = len / 2;
    std::vector<float> even(static_cast<size_t>(half + phase_taps));
    std::vector<float> odd(even.size());
    for (int r = 0; r < rows; ++r) {
        const float* br = band + static_cast<size_t>(r) * half;
        float* yr = out + static_cast<size_t>(r) * n;
        std::fill(even.begin(), even.end(), 0.0f);
        std::fill(odd.begin(), odd.end(), 0.0f);
        for (int tap = 0; tap < phase_taps; ++tap) {
            const float t_e = taps[static_cast<size_t>(2 * tap)];
            const float t_o = taps[static_cast<size_t>(2 * tap + 1)];
            float* ev = even.data() + tap;
            float* od = odd.data() + tap;
            for (int k = 0; k < half; ++k) {
                ev[k] += t_e * br[k];
                od[k] += t_o * br[k];
            }
        }
        // fold the periodic overhang back and interleave
        for (int j = 0; j < phase_taps; ++j) {
            even[static_cast<size_t>(j % half)] += even[static_cast<size_t>(half + j)];
            odd[static_cast<size_t>(j % half)] += odd[static_cast<size_t>(half + j)];
        }
        for (int j = 0; j < half; ++j) {
            yr[2 * j] += even[static_cast<size_t>(j)];
            yr[2 * j + 1] += odd[static_cast<size_t>(j)];
        }
    }
}

void analyze_h(const float* x, int planes, int h, int width, const Taps& t, float* a, float* d) {
    const int half = h / 2;
    for (int p = 0; p < planes; ++p) {
        const float* xp = x + static_cast<size_t>(p) * h * width;
        float* ap = a + static_cast<size_t>(p) * half * width;
        float* dp = d + static_cast<size_t>(p) * half * width;
        std::memset(ap, 0, sizeof(float) * static_cast<size_t>(half) * width);
        std::memset(dp, 0, sizeof(float) * static_cast<size_t>(half) * width);
        for (int k = 0; k < half; ++k) {
            float* arow = ap + static_cast<size_t>(k) * width;
            float* drow = dp + static_cast<size_t>(k) * width;
            for (int m = 0; m < t.len; ++m) {
                const float* xrow = xp + static_cast<size_t>((2 * k + m) % h) * width;
                const float lo = t.lo[static_cast<size_t>(m)];
                const float hi = t.hi[static_cast<size_t>(m)];
                for (int wcol = 0; wcol < width; ++wcol) {
                    arow[wcol] += lo * xrow[wcol];
                    drow[wcol] += hi * xrow[wcol];
                }
            }
        }
    }
}

void synth_band_h(const float* band, int planes, int h, int width, const std::vector<float>& taps,
                  int len, float* out) {
    const int half = h / 2;
    for (int p = 0; p < planes; ++p) {
        const float* bp = band + static_cast<size_t>(p) * half * width;
        float* yp = out + static_cast<size_t>(p) * h * width;
        for (int k = 0; k < half; ++k) {
            const float* brow = bp + static_cast<size_t>(k) * width;
            for (int m = 0; m < len; ++m) {
                float* yrow = yp + static_cast<size_t>((2 * k + m) % h) * width;
                const float tap = taps[static_cast<size_t>(m)];
                for (int wcol = 0; wcol < width; ++wcol) yrow[wcol] += tap * brow[wcol];
            }
        }
    }
}

// ---- differentiable axis transforms -----------------------------------------

struct AxisDims {
    int b, c, h, w;
};

AxisDims axis_dims(const Tensor& x, const char* what) {
    if (x.shape().size() != 4) {
        throw std::invalid_argument(std::string(what) + ": expected [B,C,H,W], got " +
                                    shape_str(x.shape()));
    }
    return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
}

void check_axis_len(int n, int taps, const char* what) {
    if (n % 2 != 0) {
        throw std::invalid_argument(std::string(what) + ": axis length " + std::to_string(n) +
                                    " must be even");
    }
    if (n < taps) {
        throw std::invalid_argument(std::string(what) + ": axis length " + std::to_string(n) +
                                    " shorter than the " + std::to_string(taps) + "-tap filter");
    }
}

// analysis along the width axis; lo and hi are separate graph nodes whose
// backward passes scatter through the matching synthesis filter
std::pair<Tensor, Tensor> dwt_axis_w(const Tensor& x, const WaveletFilter& f) {
    const AxisDims d = axis_dims(x, "dwt (width axis)");
    check_axis_len(d.w, f.length(), "dwt (width axis)");
    const int rows = d.b * d.c * d.h;
    const Taps ana = analysis_taps(f);
    const auto syn = std::make_shared<Taps>(synthesis_taps(f));

    std::vector<float> a(static_cast<size_t>(rows) * (d.w / 2));
    std::vector<float> dd(a.size());
    analyze_w(x.data().data(), rows, d.w, ana, a.data(), dd.data());

    const Shape out_shape{d.b, d.c, d.h, d.w / 2};
    const int n = d.w;
    auto bw_lo = [rows, n, syn](detail::TensorNode& self) {
        auto& xn = *self.parents[0];
        if (!xn.needs_grad) return;
        synth_band_w(self.grad.data(), rows, n, syn->lo, syn->len, xn.grad_buffer().data());
    };
    auto bw_hi = [rows, n, syn](detail::TensorNode& self) {
        auto& xn = *self.parents[0];
        if (!xn.needs_grad) return;
        synth_band_w(self.grad.data(), rows, n, syn->hi, syn->len, xn.grad_buffer().data());
    };
    Tensor lo = detail::make_op(out_shape, std::move(a), {x}, std::move(bw_lo), "dwt");
    Tensor hi = detail::make_op(out_shape, std::move(dd), {x}, std::move(bw_hi), "dwt");
    return {lo, hi};
}

std::pair<Tensor, Tensor> dwt_axis_h(const Tensor& x, const WaveletFilter& f) {
    const AxisDims d = axis_dims(x, "dwt (height axis)");
    check_axis_len(d.h, f.length(), "dwt (height axis)");
    const int planes = d.b * d.c;
    const Taps ana = analysis_taps(f);
    const auto syn = std::make_shared<Taps>(synthesis_taps(f));

    std::vector<float> a(static_cast<size_t>(planes) * (d.h / 2) * d.w);
    std::vector<float> dd(a.size());
    analyze_h(x.data().data(), planes, d.h, d.w, ana, a.data(), dd.data());

    const Shape out_shape{d.b, d.c, d.h / 2, d.w};
    const int h = d.h, w = d.w;
    auto bw_lo = [planes, h, w, syn](detail::TensorNode& self) {
        auto& xn = *self.parents[0];
        if (!xn.needs_grad) return;
        synth_band_h(self.grad.data(), planes, h, w, syn->lo, syn->len, xn.grad_buffer().data());
    };
    auto bw_hi = [planes, h, w, syn](detail::TensorNode& self) {
        auto& xn = *self.parents[0];
        if (!xn.needs_grad) return;
        synth_band_h(self.grad.data(), planes, h, w, syn->hi, syn->len, xn.grad_buffer().data());
    };
    Tensor lo = detail::make_op(out_shape, std::move(a), {x}, std::move(bw_lo), "dwt");
    Tensor hi = detail::make_op(out_shape, std::move(dd), {x}, std::move(bw_hi), "dwt");
    return {lo, hi};
}

Tensor idwt_axis_w(const Tensor& lo, const Tensor& hi, const WaveletFilter& f) {
    if (lo.shape() != hi.shape()) {
        throw std::invalid_argument("idwt (width axis): band shapes differ, " +
                                    shape_str(lo.shape()) + " vs " + shape_str(hi.shape()));
    }
    const AxisDims d = axis_dims(lo, "idwt (width axis)");
    const int rows = d.b * d.c * d.h;
    const int n = 2 * d.w;
    check_axis_len(n, f.length(), "idwt (width axis)");
    const Taps syn = synthesis_taps(f);
    const auto ana = std::make_shared<Taps>(analysis_taps(f));

    std::vector<float> out(static_cast<size_t>(rows) * n, 0.0f);
    synth_band_w(lo.data().data(), rows, n, syn.lo, syn.len, out.data());
    synth_band_w(hi.data().data(), rows, n, syn.hi, syn.len, out.data());

    auto bw = [rows, n, ana](detail::TensorNode& self) {
        auto& ln = *self.parents[0];
        auto& hn = *self.parents[1];
        // adjoint of synthesis is analysis with the matching filter
        std::vector<float> ga(static_cast<size_t>(rows) * (n / 2));
        std::vector<float> gd(ga.size());
        analyze_w(self.grad.data(), rows, n, *ana, ga.data(), gd.data());
        if (ln.needs_grad) ln.accumulate(ga);
        if (hn.needs_grad) hn.accumulate(gd);
    };
    return detail::make_op({d.b, d.c, d.h, n}, std::move(out), {lo, hi}, std::move(bw), "idwt");
}

Tensor idwt_axis_h(const Tensor& lo, const Tensor& hi, const WaveletFilter& f) {
    if (lo.shape() != hi.shape()) {
        throw std::invalid_argument("idwt (height axis): band shapes differ, " +
                                    shape_str(lo.shape()) + " vs " + shape_str(hi.shape()));
    }
    const AxisDims d = axis_dims(lo, "idwt (height axis)");
    const int planes = d.b * d.c;
    const int h = 2 * d.h;
    check_axis_len(h, f.length(), "idwt (height axis)");
    const Taps syn = synthesis_taps(f);
    const auto ana = std::make_shared<Taps>(analysis_taps(f));

    std::vector<float> out(static_cast<size_t>(planes) * h * d.w, 0.0f);
    synth_band_h(lo.data().data(), planes, h, d.w, syn.lo, syn.len, out.data());
    synth_band_h(hi.data().data(), planes, h, d.w, syn.hi, syn.len, out.data());

    const int w = d.w;
    auto bw = [planes, h, w, ana](detail::TensorNode& self) {
        auto& ln = *self.parents[0];
        auto& hn = *self.parents[1];
        std::vector<float> ga(static_cast<size_t>(planes) * (h / 2) * w);
        std::vector<float> gd(ga.size());
        analyze_h(self.grad.data(), planes, h, w, *ana, ga.data(), gd.data());
        if (ln.needs_grad) ln.accumulate(ga);
        if (hn.needs_grad) hn.accumulate(gd);
    };
    return detail::make_op({d.b, d.c, h, d.w}, std::move(out), {lo, hi}, std::move(bw), "idwt");
}

} // namespace

WaveletFilter wavelet_filters(const std::string& name) {
    if (name == "haar") return build_filter(name, kHaar, 2);
    if (name == "db2") return build_filter(name, kDb2, 4);
    if (name == "db4") return build_filter(name, kDb4, 8);
    throw std::invalid_argument("unknown wavelet '" + name + "' (expected haar, db2 or db4)");
}

std::pair<Tensor, Tensor> dwt1d_periodic(const Tensor& x, const WaveletFilter& f) {
    if (x.shape().size() != 1) {
        throw std::invalid_argument("dwt1d_periodic expects a rank-1 tensor, got " +
                                    shape_str(x.shape()));
    }
    const int n = x.dim(0);
    check_axis_len(n, f.length(), "dwt1d_periodic");
    Tensor as4 = reshape(x, {1, 1, 1, n});
    auto [lo, hi] = dwt_axis_w(as4, f);
    return {reshape(lo, {n / 2}), reshape(hi, {n / 2})};
}

Tensor idwt1d_periodic(const Tensor& approx, const Tensor& detail, const WaveletFilter& f) {
    if (approx.shape().size() != 1 || detail.shape().size() != 1 ||
        approx.dim(0) != detail.dim(0)) {
        throw std::invalid_argument("idwt1d_periodic: band lengths differ, " +
                                    shape_str(approx.shape()) + " vs " +
                                    shape_str(detail.shape()));
    }
    const int half = approx.dim(0);
    Tensor x = idwt_axis_w(reshape(approx, {1, 1, 1, half}), reshape(detail, {1, 1, 1, half}), f);
    return reshape(x, {2 * half});
}

Bands2d dwt2d(const Tensor& x, const WaveletFilter& f) {
    auto [low_w, high_w] = dwt_axis_w(x, f);
    auto [ll, lh] = dwt_axis_h(low_w, f);
    auto [hl, hh] = dwt_axis_h(high_w, f);
    return {ll, lh, hl, hh};
}

Tensor idwt2d(const Bands2d& bands, const WaveletFilter& f) {
    return idwt2d(bands.ll, bands.lh, bands.hl, bands.hh, f);
}

Tensor idwt2d(const Tensor& ll, const Tensor& lh, const Tensor& hl, const Tensor& hh,
              const WaveletFilter& f) {
    Tensor low_w = idwt_axis_h(ll, lh, f);
    Tensor high_w = idwt_axis_h(hl, hh, f);
    return idwt_axis_w(low_w, high_w, f);
}

CoeffPyramid wavedec2(const Tensor& x, const WaveletFilter& f, int levels) {
    if (levels < 1) throw std::invalid_argument("wavedec2: levels must be >= 1");
    const AxisDims d = axis_dims(x, "wavedec2");
    const int factor = 1 << levels;
    if (d.h % factor != 0 || d.w % factor != 0) {
        throw std::invalid_argument("wavedec2: dims " + shape_str(x.shape()) +
                                    " not divisible by 2^" + std::to_string(levels));
    }
    CoeffPyramid p;
    p.levels = levels;
    Tensor current = x;
    for (int l = 0; l < levels; ++l) {
        Bands2d b = dwt2d(current, f);
        p.details.push_back({b.lh, b.hl, b.hh});
        current = b.ll;
    }
    p.approx = current;
    return p;
}

Tensor waverec2(const CoeffPyramid& p, const WaveletFilter& f) {
    if (p.levels < 1 || static_cast<int>(p.details.size()) != p.levels) {
        throw std::invalid_argument("waverec2: inconsistent pyramid");
    }
    Tensor current = p.approx;
    for (int l = p.levels - 1; l >= 0; --l) {
        const DetailBands& d = p.details[static_cast<size_t>(l)];
        current = idwt2d(current, d.lh, d.hl, d.hh, f);
    }
    return current;
}

} // namespace uwno
