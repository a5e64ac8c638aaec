#include "uwno/tensor.hpp"

#include "uwno/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_set>

#if defined(__SSE3__)
#include <pmmintrin.h>
#endif

namespace uwno {

void flush_denormals_to_zero() {
#if defined(__SSE3__)
    _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
    _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
#endif
}

int numel(const Shape& s) {
    int n = 1;
    for (int d : s) {
        if (d <= 0) throw std::invalid_argument("tensor dims must be positive");
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

namespace detail {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

std::vector<float>& TensorNode::grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0f);
    return grad;
}

void TensorNode::accumulate(std::span<const float> g) {
    auto& dst = grad_buffer();
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

namespace {

// finite iff the exponent bits are not all ones; the bit test vectorizes
void ensure_finite(const std::vector<float>& v, const char* op_name) {
    uint32_t bad = 0;
    for (float x : v) {
        uint32_t bits;
        std::memcpy(&bits, &x, 4);
        bad |= static_cast<uint32_t>((bits & 0x7f800000u) == 0x7f800000u);
    }
    if (bad) {
        throw std::runtime_error(std::string("non-finite value produced by ") + op_name);
    }
}

} // namespace

Tensor make_op(Shape shape, std::vector<float> value, std::vector<Tensor> inputs,
               std::function<void(TensorNode&)> backward_fn, const char* op_name,
               bool check_finite) {
    if (check_finite) ensure_finite(value, op_name);
    Tensor out(std::move(shape), std::move(value));
    bool needs = false;
    if (grad_enabled()) {
        for (const auto& in : inputs) {
            if (in.node()->needs_grad) { needs = true; break; }
        }
    }
    if (needs) {
        auto& node = *out.node();
        node.needs_grad = true;
        node.parents.reserve(inputs.size());
        for (auto& in : inputs) node.parents.push_back(in.node());
        node.backward_fn = std::move(backward_fn);
    }
    return out;
}

} // namespace detail

NoGradGuard::NoGradGuard() : prev_(detail::grad_enabled()) { detail::set_grad_enabled(false); }
NoGradGuard::~NoGradGuard() { detail::set_grad_enabled(prev_); }

Tensor::Tensor(Shape shape) {
    int n = uwno::numel(shape);
    node_ = std::make_shared<detail::TensorNode>();
    node_->shape = std::move(shape);
    node_->value.assign(static_cast<size_t>(n), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data) {
    if (uwno::numel(shape) != static_cast<int>(data.size())) {
        throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    }
    node_ = std::make_shared<detail::TensorNode>();
    node_->shape = std::move(shape);
    node_->value = std::move(data);
}

Tensor Tensor::full(Shape shape, float v) {
    Tensor t(std::move(shape));
    std::fill(t.node_->value.begin(), t.node_->value.end(), v);
    return t;
}

float Tensor::item() const {
    if (numel() != 1) {
        throw std::invalid_argument("item() requires a scalar tensor, got " + shape_str(shape()));
    }
    return node_->value[0];
}

Tensor& Tensor::set_requires_grad(bool v) {
    node_->requires_grad = v;
    node_->needs_grad = v || !node_->parents.empty();
    return *this;
}

std::span<const float> Tensor::grad() const {
    if (node_->grad.empty()) {
        throw std::logic_error("gradient not populated; run backward() first");
    }
    return node_->grad;
}

void Tensor::zero_grad() {
    node_->grad.clear();
    node_->grad.shrink_to_fit();
    node_->backward_done = false;
}

Tensor Tensor::clone() const {
    return Tensor(node_->shape, node_->value);
}

// ---- shape helpers ---------------------------------------------------------

namespace {

void expect_rank(const Tensor& t, size_t rank, const char* what) {
    if (t.shape().size() != rank) {
        throw std::invalid_argument(std::string(what) + ": expected rank " +
                                    std::to_string(rank) + " tensor, got " +
                                    shape_str(t.shape()));
    }
}

// Vectorized dot product; the simd reduction fixes the lane count per
// binary, so results stay deterministic from run to run.
float dot_lanes(const float* a, const float* b, int n) {
    float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

} // namespace

// ---- conv2d ----------------------------------------------------------------

namespace {

// Zero-padded copy of one [C,H,W] image block.
void pad_image(const float* src, int c, int h, int w, int pad, float* dst) {
    const int hp = h + 2 * pad, wp = w + 2 * pad;
    std::memset(dst, 0, sizeof(float) * static_cast<size_t>(c) * hp * wp);
    for (int ci = 0; ci < c; ++ci) {
        for (int y = 0; y < h; ++y) {
            std::memcpy(dst + (static_cast<size_t>(ci) * hp + y + pad) * wp + pad,
                        src + (static_cast<size_t>(ci) * h + y) * w,
                        sizeof(float) * static_cast<size_t>(w));
        }
    }
}

struct ConvDims {
    int batch, cin, h, w, cout, k, pad, ho, wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, const Tensor& b, int padding) {
    expect_rank(x, 4, "conv2d input");
    expect_rank(w, 4, "conv2d weight");
    expect_rank(b, 1, "conv2d bias");
    ConvDims d;
    d.batch = x.dim(0);
    d.cin = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.cout = w.dim(0);
    d.k = w.dim(2);
    d.pad = padding;
    if (w.dim(1) != d.cin) {
        throw std::invalid_argument("conv2d: weight expects " + std::to_string(w.dim(1)) +
                                    " input channels, input has " + std::to_string(d.cin));
    }
    if (w.dim(3) != d.k) throw std::invalid_argument("conv2d: kernel must be square");
    if (d.k % 2 == 0) throw std::invalid_argument("conv2d: kernel size must be odd");
    if (b.dim(0) != d.cout) throw std::invalid_argument("conv2d: bias size must equal Cout");
    if (padding < 0 || padding > d.k - 1) {
        throw std::invalid_argument("conv2d: padding must lie in [0, k-1]");
    }
    d.ho = d.h + 2 * padding - d.k + 1;
    d.wo = d.w + 2 * padding - d.k + 1;
    if (d.ho <= 0 || d.wo <= 0) {
        throw std::invalid_argument("conv2d: input " + shape_str(x.shape()) +
                                    " too small for kernel " + std::to_string(d.k));
    }
    return d;
}

} // namespace

namespace {

// Correlation core: out[co][oh][ow] (+)= sum_{ci,kh,kw} taps[co][ci][kh][kw]
// * padded[ci][oh+kh][ow+kw], one output row accumulated in a local buffer
// so it is stored exactly once. The k == 3 path keeps the three row taps in
// registers.
void correlate_into(const float* padded, int cin, int hp, int wp, const float* taps, int cout,
                    int k, const float* bias, int ho, int wo, float* out, bool accumulate) {
    std::vector<float> acc(static_cast<size_t>(wo));
    for (int co = 0; co < cout; ++co) {
        float* oplane = out + static_cast<size_t>(co) * ho * wo;
        const float* wbase = taps + static_cast<size_t>(co) * cin * k * k;
        for (int oh = 0; oh < ho; ++oh) {
            float* dst = oplane + static_cast<size_t>(oh) * wo;
            if (accumulate) {
                std::memcpy(acc.data(), dst, sizeof(float) * static_cast<size_t>(wo));
                if (bias) {
                    const float bv = bias[co];
                    for (int ow = 0; ow < wo; ++ow) acc[static_cast<size_t>(ow)] += bv;
                }
            } else {
                std::fill(acc.begin(), acc.end(), bias ? bias[co] : 0.0f);
            }
            for (int ci = 0; ci < cin; ++ci) {
                const float* pplane = padded + static_cast<size_t>(ci) * hp * wp;
                const float* wrow = wbase + static_cast<size_t>(ci) * k * k;
                if (k == 3) {
                    for (int kh = 0; kh < 3; ++kh) {
                        const float* src = pplane + static_cast<size_t>(oh + kh) * wp;
                        const float w0 = wrow[kh * 3], w1 = wrow[kh * 3 + 1],
                                    w2 = wrow[kh * 3 + 2];
                        for (int ow = 0; ow < wo; ++ow) {
                            acc[static_cast<size_t>(ow)] +=
                                w0 * src[ow] + w1 * src[ow + 1] + w2 * src[ow + 2];
                        }
                    }
                } else if (k == 1) {
                    const float* src = pplane + static_cast<size_t>(oh) * wp;
                    const float w0 = wrow[0];
                    for (int ow = 0; ow < wo; ++ow) acc[static_cast<size_t>(ow)] += w0 * src[ow];
                } else {
                    for (int kh = 0; kh < k; ++kh) {
                        const float* src = pplane + static_cast<size_t>(oh + kh) * wp;
                        for (int kw = 0; kw < k; ++kw) {
                            const float wgt = wrow[kh * k + kw];
                            for (int ow = 0; ow < wo; ++ow) {
                                acc[static_cast<size_t>(ow)] += wgt * src[ow + kw];
                            }
                        }
                    }
                }
            }
            std::memcpy(dst, acc.data(), sizeof(float) * static_cast<size_t>(wo));
        }
    }
}

// dw[co][ci][kh][kw] += sum_{oh,ow} dy[co][oh][ow] * padded[ci][oh+kh][ow+kw];
// the kw dots share each gradient row load.
void weight_grad_accum(const float* padded, int cin, int hp, int wp, const float* dy, int cout,
                       int k, int ho, int wo, float* dw) {
    for (int co = 0; co < cout; ++co) {
        const float* gplane = dy + static_cast<size_t>(co) * ho * wo;
        for (int ci = 0; ci < cin; ++ci) {
            const float* pplane = padded + static_cast<size_t>(ci) * hp * wp;
            float* wrow = dw + (static_cast<size_t>(co) * cin + ci) * k * k;
            for (int kh = 0; kh < k; ++kh) {
                if (k == 3) {
                    float a0 = 0.0f, a1 = 0.0f, a2 = 0.0f;
                    for (int oh = 0; oh < ho; ++oh) {
                        const float* g = gplane + static_cast<size_t>(oh) * wo;
                        const float* src = pplane + static_cast<size_t>(oh + kh) * wp;
                        a0 += dot_lanes(g, src, wo);
                        a1 += dot_lanes(g, src + 1, wo);
                        a2 += dot_lanes(g, src + 2, wo);
                    }
                    wrow[kh * 3] += a0;
                    wrow[kh * 3 + 1] += a1;
                    wrow[kh * 3 + 2] += a2;
                } else {
                    for (int kw = 0; kw < k; ++kw) {
                        float acc = 0.0f;
                        for (int oh = 0; oh < ho; ++oh) {
                            acc += dot_lanes(gplane + static_cast<size_t>(oh) * wo,
                                             pplane + static_cast<size_t>(oh + kh) * wp + kw, wo);
                        }
                        wrow[kh * k + kw] += acc;
                    }
                }
            }
        }
    }
}

} // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int padding) {
    const ConvDims d = conv_dims(x, w, b, padding);
    const int hp = d.h + 2 * d.pad, wp = d.w + 2 * d.pad;

    const float* xv = x.data().data();
    std::vector<float> out(static_cast<size_t>(d.batch) * d.cout * d.ho * d.wo);
    std::vector<float> padded(static_cast<size_t>(d.cin) * hp * wp);

    for (int bi = 0; bi < d.batch; ++bi) {
        pad_image(xv + static_cast<size_t>(bi) * d.cin * d.h * d.w, d.cin, d.h, d.w, d.pad,
                  padded.data());
        correlate_into(padded.data(), d.cin, hp, wp, w.data().data(), d.cout, d.k,
                       b.data().data(), d.ho, d.wo,
                       out.data() + static_cast<size_t>(bi) * d.cout * d.ho * d.wo, false);
    }

    auto bw = [d, hp, wp](detail::TensorNode& self) {
        auto& xn = *self.parents[0];
        auto& wn = *self.parents[1];
        auto& bn = *self.parents[2];
        const float* dy = self.grad.data();

        if (bn.needs_grad) {
            auto& db = bn.grad_buffer();
            for (int bi = 0; bi < d.batch; ++bi) {
                for (int co = 0; co < d.cout; ++co) {
                    const float* g = dy + (static_cast<size_t>(bi) * d.cout + co) * d.ho * d.wo;
                    double acc = 0.0;
                    for (int i = 0; i < d.ho * d.wo; ++i) acc += g[i];
                    db[static_cast<size_t>(co)] += static_cast<float>(acc);
                }
            }
        }

        // dx is the correlation of the padded output gradient with the
        // kernel flipped in both spatial dims and transposed in channels
        const int gpad = d.k - 1 - d.pad;
        std::vector<float> flipped;
        if (xn.needs_grad) {
            flipped.resize(wn.value.size());
            for (int co = 0; co < d.cout; ++co) {
                for (int ci = 0; ci < d.cin; ++ci) {
                    for (int kk = 0; kk < d.k * d.k; ++kk) {
                        flipped[((static_cast<size_t>(ci) * d.cout + co) * d.k * d.k) +
                                static_cast<size_t>(d.k * d.k - 1 - kk)] =
                            wn.value[(static_cast<size_t>(co) * d.cin + ci) * d.k * d.k +
                                     static_cast<size_t>(kk)];
                    }
                }
            }
        }

        const int ghp = d.ho + 2 * gpad, gwp = d.wo + 2 * gpad;
        std::vector<float> gpadded;
        if (xn.needs_grad) gpadded.resize(static_cast<size_t>(d.cout) * ghp * gwp);
        std::vector<float> xpadded;
        if (wn.needs_grad) xpadded.resize(static_cast<size_t>(d.cin) * hp * wp);

        auto& dw = wn.needs_grad ? wn.grad_buffer() : wn.grad;
        auto& dx = xn.needs_grad ? xn.grad_buffer() : xn.grad;

        for (int bi = 0; bi < d.batch; ++bi) {
            const float* gplane = dy + static_cast<size_t>(bi) * d.cout * d.ho * d.wo;
            if (wn.needs_grad) {
                pad_image(xn.value.data() + static_cast<size_t>(bi) * d.cin * d.h * d.w,
                          d.cin, d.h, d.w, d.pad, xpadded.data());
                weight_grad_accum(xpadded.data(), d.cin, hp, wp, gplane, d.cout, d.k, d.ho,
                                  d.wo, dw.data());
            }
            if (xn.needs_grad) {
                pad_image(gplane, d.cout, d.ho, d.wo, gpad, gpadded.data());
                correlate_into(gpadded.data(), d.cout, ghp, gwp, flipped.data(), d.cin, d.k,
                               nullptr, d.h, d.w,
                               dx.data() + static_cast<size_t>(bi) * d.cin * d.h * d.w, true);
            }
        }
    };

    return detail::make_op({d.batch, d.cout, d.ho, d.wo}, std::move(out), {x, w, b},
                           std::move(bw), "conv2d");
}

// ---- pooling / upsampling --------------------------------------------------

Tensor max_pool2d(const Tensor& x) {
    expect_rank(x, 4, "max_pool2d input");
    const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0) {
        throw std::invalid_argument("max_pool2d: spatial dims must be even, got " +
                                    shape_str(x.shape()));
    }
    const int ho = h / 2, wo = w / 2;
    const float* xv = x.data().data();
    std::vector<float> out(static_cast<size_t>(b) * c * ho * wo);
    // index of the winning cell inside its 2x2 window (row-major 0..3)
    auto argmax = std::make_shared<std::vector<uint8_t>>(out.size());

    for (int p = 0; p < b * c; ++p) {
        const float* plane = xv + static_cast<size_t>(p) * h * w;
        float* oplane = out.data() + static_cast<size_t>(p) * ho * wo;
        uint8_t* aplane = argmax->data() + static_cast<size_t>(p) * ho * wo;
        for (int oh = 0; oh < ho; ++oh) {
            for (int ow = 0; ow < wo; ++ow) {
                const float* cell = plane + (2 * oh) * w + 2 * ow;
                float best = cell[0];
                uint8_t arg = 0;
                if (cell[1] > best) { best = cell[1]; arg = 1; }
                if (cell[w] > best) { best = cell[w]; arg = 2; }
                if (cell[w + 1] > best) { best = cell[w + 1]; arg = 3; }
                oplane[oh * wo + ow] = best;
                aplane[oh * wo + ow] = arg;
            }
        }
    }

    auto bw = [b, c, h, w, ho, wo, argmax](detail::TensorNode& self) {
        auto& xn = *self.parents[0];
        if (!xn.needs_grad) return;
        auto& dx = xn.grad_buffer();
        const float* dy = self.grad.data();
        for (int p = 0; p < b * c; ++p) {
            float* dplane = dx.data() + static_cast<size_t>(p) * h * w;
            const float* gplane = dy + static_cast<size_t>(p) * ho * wo;
            const uint8_t* aplane = argmax->data() + static_cast<size_t>(p) * ho * wo;
            for (int oh = 0; oh < ho; ++oh) {
                for (int ow = 0; ow < wo; ++ow) {
                    const uint8_t a = aplane[oh * wo + ow];
                    dplane[(2 * oh + a / 2) * w + 2 * ow + a % 2] += gplane[oh * wo + ow];
                }
            }
        }
    };

    return detail::make_op({b, c, ho, wo}, std::move(out), {x}, std::move(bw), "max_pool2d", false);
}

Tensor upsample_nearest2d(const Tensor& x) {
    expect_rank(x, 4, "upsample_nearest2d input");
    const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int ho = 2 * h, wo = 2 * w;
    const float* xv = x.data().data();
    std::vector<float> out(static_cast<size_t>(b) * c * ho * wo);

    for (int p = 0; p < b * c; ++p) {
        const float* plane = xv + static_cast<size_t>(p) * h * w;
        float* oplane = out.data() + static_cast<size_t>(p) * ho * wo;
        for (int y = 0; y < h; ++y) {
            float* row0 = oplane + (2 * y) * wo;
            for (int xw = 0; xw < w; ++xw) {
                row0[2 * xw] = row0[2 * xw + 1] = plane[y * w + xw];
            }
            std::memcpy(row0 + wo, row0, sizeof(float) * static_cast<size_t>(wo));
        }
    }

    auto bw = [b, c, h, w, wo](detail::TensorNode& self) {
        auto& xn = *self.parents[0];
        if (!xn.needs_grad) return;
        auto& dx = xn.grad_buffer();
        const float* dy = self.grad.data();
        for (int p = 0; p < b * c; ++p) {
            float* dplane = dx.data() + static_cast<size_t>(p) * h * w;
            const float* gplane = dy + static_cast<size_t>(p) * (2 * h) * wo;
            for (int y = 0; y < h; ++y) {
                const float* r0 = gplane + (2 * y) * wo;
                const float* r1 = r0 + wo;
                for (int xw = 0; xw < w; ++xw) {
                    dplane[y * w + xw] +=
                        (r0[2 * xw] + r0[2 * xw + 1]) + (r1[2 * xw] + r1[2 * xw + 1]);
                }
            }
        }
    };

    return detail::make_op({b, c, ho, wo}, std::move(out), {x}, std::move(bw),
                           "upsample_nearest2d", false);
}

// ---- pointwise -------------------------------------------------------------

Tensor relu(const Tensor& x) {
    std::vector<float> out(x.numel());
    auto xv = x.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0f ? xv[i] : 0.0f;

    auto bw = [](detail::TensorNode& self) {
        auto& xn = *self.parents[0];
        if (!xn.needs_grad) return;
        auto& dx = xn.grad_buffer();
        // subgradient 0 at exactly 0: pass only where the output is positive
        for (size_t i = 0; i < dx.size(); ++i) {
            dx[i] += self.value[i] > 0.0f ? self.grad[i] : 0.0f;
        }
    };
    return detail::make_op(x.shape(), std::move(out), {x}, std::move(bw), "relu", false);
}

Tensor sigmoid(const Tensor& x) {
    std::vector<float> out(x.numel());
    auto xv = x.data();
    for (int i = 0; i < x.numel(); ++i) {
        const float v = xv[static_cast<size_t>(i)];
        out[static_cast<size_t>(i)] =
            v >= 0.0f ? 1.0f / (1.0f + std::exp(-v))
                      : std::exp(v) / (1.0f + std::exp(v));
    }
    auto bw = [](detail::TensorNode& self) {
        auto& xn = *self.parents[0];
        if (!xn.needs_grad) return;
        auto& dx = xn.grad_buffer();
        for (size_t i = 0; i < dx.size(); ++i) {
            const float s = self.value[i];
            dx[i] += self.grad[i] * s * (1.0f - s);
        }
    };
    return detail::make_op(x.shape(), std::move(out), {x}, std::move(bw), "sigmoid", false);
}

// ---- combining -------------------------------------------------------------

namespace {

void expect_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    expect_same_shape(a, b, "add");
    std::vector<float> out(a.numel());
    auto av = a.data(), bv = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];

    auto bw = [](detail::TensorNode& self) {
        for (auto& p : self.parents) {
            if (p->needs_grad) p->accumulate(self.grad);
        }
    };
    return detail::make_op(a.shape(), std::move(out), {a, b}, std::move(bw), "add");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    expect_same_shape(a, b, "mul");
    std::vector<float> out(a.numel());
    auto av = a.data(), bv = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];

    auto bw = [](detail::TensorNode& self) {
        auto& an = *self.parents[0];
        auto& bn = *self.parents[1];
        if (an.needs_grad) {
            auto& da = an.grad_buffer();
            for (size_t i = 0; i < da.size(); ++i) da[i] += self.grad[i] * bn.value[i];
        }
        if (bn.needs_grad) {
            auto& db = bn.grad_buffer();
            for (size_t i = 0; i < db.size(); ++i) db[i] += self.grad[i] * an.value[i];
        }
    };
    return detail::make_op(a.shape(), std::move(out), {a, b}, std::move(bw), "mul");
}

Tensor scale(const Tensor& x, float c) {
    std::vector<float> out(x.numel());
    auto xv = x.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = c * xv[i];

    auto bw = [c](detail::TensorNode& self) {
        auto& xn = *self.parents[0];
        if (!xn.needs_grad) return;
        auto& dx = xn.grad_buffer();
        for (size_t i = 0; i < dx.size(); ++i) dx[i] += c * self.grad[i];
    };
    return detail::make_op(x.shape(), std::move(out), {x}, std::move(bw), "scale");
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    expect_rank(a, 4, "concat_channels lhs");
    expect_rank(b, 4, "concat_channels rhs");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
        throw std::invalid_argument("concat_channels: batch/spatial mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    const int batch = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    const int plane = a.dim(2) * a.dim(3);
    std::vector<float> out(static_cast<size_t>(batch) * (ca + cb) * plane);
    for (int bi = 0; bi < batch; ++bi) {
        std::memcpy(out.data() + static_cast<size_t>(bi) * (ca + cb) * plane,
                    a.data().data() + static_cast<size_t>(bi) * ca * plane,
                    sizeof(float) * static_cast<size_t>(ca) * plane);
        std::memcpy(out.data() + (static_cast<size_t>(bi) * (ca + cb) + ca) * plane,
                    b.data().data() + static_cast<size_t>(bi) * cb * plane,
                    sizeof(float) * static_cast<size_t>(cb) * plane);
    }

    auto bw = [batch, ca, cb, plane](detail::TensorNode& self) {
        auto& an = *self.parents[0];
        auto& bn = *self.parents[1];
        for (int bi = 0; bi < batch; ++bi) {
            const float* g = self.grad.data() + static_cast<size_t>(bi) * (ca + cb) * plane;
            if (an.needs_grad) {
                auto& da = an.grad_buffer();
                float* dst = da.data() + static_cast<size_t>(bi) * ca * plane;
                for (int i = 0; i < ca * plane; ++i) dst[i] += g[i];
            }
            if (bn.needs_grad) {
                auto& db = bn.grad_buffer();
                float* dst = db.data() + static_cast<size_t>(bi) * cb * plane;
                const float* gb = g + static_cast<size_t>(ca) * plane;
                for (int i = 0; i < cb * plane; ++i) dst[i] += gb[i];
            }
        }
    };
    return detail::make_op({batch, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {a, b},
                           std::move(bw), "concat_channels", false);
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (uwno::numel(shape) != x.numel()) {
        throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " +
                                    shape_str(shape));
    }
    std::vector<float> out(x.data().begin(), x.data().end());
    auto bw = [](detail::TensorNode& self) {
        auto& xn = *self.parents[0];
        if (xn.needs_grad) xn.accumulate(self.grad);
    };
    return detail::make_op(std::move(shape), std::move(out), {x}, std::move(bw), "reshape", false);
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    auto bw = [](detail::TensorNode& self) {
        auto& xn = *self.parents[0];
        if (!xn.needs_grad) return;
        auto& dx = xn.grad_buffer();
        const float g = self.grad[0];
        for (auto& v : dx) v += g;
    };
    return detail::make_op({1}, {static_cast<float>(acc)}, {x}, std::move(bw), "sum");
}

// ---- backward sweep ---------------------------------------------------------

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw std::invalid_argument("backward requires a scalar loss");
    }
    auto root = loss.node();
    if (root->backward_done) {
        throw std::logic_error("backward already ran for this value; rebuild the graph");
    }

    // iterative post-order DFS: parents precede children in `order`
    std::vector<detail::TensorNode*> order;
    std::unordered_set<detail::TensorNode*> seen;
    struct Frame {
        detail::TensorNode* node;
        size_t next_parent;
    };
    std::vector<Frame> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            detail::TensorNode* p = f.node->parents[f.next_parent++].get();
            if (seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    root->grad_buffer()[0] = 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorNode* n = *it;
        n->backward_done = true;
        if (!n->backward_fn) continue;
        if (n->grad.empty()) continue;     // unused branch of a multi-output op
        n->backward_fn(*n);
        if (!n->requires_grad) {
            n->grad.clear();
            n->grad.shrink_to_fit();
        }
    }
}

// ---- finite differences ------------------------------------------------------

float finite_diff_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& theta,
                        float step, int n_coords, uint64_t seed) {
    if (step <= 0.0f) throw std::invalid_argument("finite_diff_check: step must be positive");

    Tensor t = theta.clone();
    t.set_requires_grad(true);
    Tensor out = f(t);
    if (out.numel() != 1) {
        throw std::invalid_argument("finite_diff_check: f must produce a scalar");
    }
    backward(out);
    std::vector<float> analytic(t.grad().begin(), t.grad().end());

    const int total = t.numel();
    const int want = std::max(n_coords, 5);
    std::vector<int> coords;
    if (total <= want) {
        coords.resize(static_cast<size_t>(total));
        for (int i = 0; i < total; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
        Rng rng(seed);
        std::unordered_set<int> picked;
        while (static_cast<int>(coords.size()) < want) {
            int c = static_cast<int>(rng.below(static_cast<uint64_t>(total)));
            if (picked.insert(c).second) coords.push_back(c);
        }
    }

    NoGradGuard no_grad;
    float worst = 0.0f;
    for (int c : coords) {
        const size_t ci = static_cast<size_t>(c);
        const float saved = t.data()[ci];
        t.data()[ci] = saved + step;
        const double fp = f(t).item();
        t.data()[ci] = saved - step;
        const double fm = f(t).item();
        t.data()[ci] = saved;
        const double central = (fp - fm) / (2.0 * static_cast<double>(step));
        const double a = analytic[ci];
        const double rel = std::abs(a - central) /
                           std::max({std::abs(a), std::abs(central), 1e-8});
        worst = std::max(worst, static_cast<float>(rel));
    }
    return worst;
}

} // namespace uwno
