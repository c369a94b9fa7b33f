#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sparsect/autodiff.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

// Dense NCHW convolution kernels. Every parallel loop partitions output
// elements so each is produced by exactly one thread with a fixed inner
// summation order; results are identical for any thread count.

namespace sparsect::ad {

namespace detail {
void check_node_values(const Node& n);
Var wrap_node(const char* op, Tensor value, std::vector<Var> parents);
}  // namespace detail

namespace {

using detail::wrap_node;

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }
int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }

struct ConvDims {
    int ci, h, w;
    int co, kh, kw;
    int stride, pad;
    int ho, wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& wt, const Tensor& b, int stride, int pad) {
    if (x.shape.size() != 3 || wt.shape.size() != 4 || b.shape.size() != 1)
        throw std::invalid_argument("conv2d: expected x(C,H,W), w(Co,Ci,kh,kw), b(Co)");
    ConvDims d;
    d.ci = x.shape[0];
    d.h = x.shape[1];
    d.w = x.shape[2];
    d.co = wt.shape[0];
    d.kh = wt.shape[2];
    d.kw = wt.shape[3];
    d.stride = stride;
    d.pad = pad;
    if (wt.shape[1] != d.ci) throw std::invalid_argument("conv2d: kernel input channels != x channels");
    if (b.shape[0] != d.co) throw std::invalid_argument("conv2d: bias size != output channels");
    if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: bad stride/pad");
    d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
    d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
    if (d.ho < 1 || d.wo < 1) throw std::invalid_argument("conv2d: kernel larger than padded input");
    return d;
}

// valid output range [lo, hi) for one kernel offset: 0 <= o*stride - pad + k < n
void out_range(int n, int stride, int pad, int k, int n_out, int& lo, int& hi) {
    lo = std::max(0, ceil_div(pad - k, stride));
    hi = std::min(n_out, floor_div(n - 1 + pad - k, stride) + 1);
}

void conv2d_forward(const ConvDims& d, const double* x, const double* wt, const double* b,
                    double* out) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int co = 0; co < d.co; ++co) {
        double* oc = out + static_cast<size_t>(co) * d.ho * d.wo;
        std::fill(oc, oc + static_cast<size_t>(d.ho) * d.wo, b[co]);
        for (int ci = 0; ci < d.ci; ++ci) {
            const double* xc = x + static_cast<size_t>(ci) * d.h * d.w;
            const double* wk = wt + (static_cast<size_t>(co) * d.ci + ci) * d.kh * d.kw;
            for (int ky = 0; ky < d.kh; ++ky) {
                int oy_lo, oy_hi;
                out_range(d.h, d.stride, d.pad, ky, d.ho, oy_lo, oy_hi);
                for (int kx = 0; kx < d.kw; ++kx) {
                    const double wv = wk[ky * d.kw + kx];
                    int ox_lo, ox_hi;
                    out_range(d.w, d.stride, d.pad, kx, d.wo, ox_lo, ox_hi);
                    for (int oy = oy_lo; oy < oy_hi; ++oy) {
                        const double* xrow = xc + static_cast<size_t>(oy * d.stride - d.pad + ky) * d.w;
                        double* orow = oc + static_cast<size_t>(oy) * d.wo;
                        if (d.stride == 1) {
                            const double* xs = xrow + (ox_lo - d.pad + kx);
                            for (int ox = ox_lo; ox < ox_hi; ++ox)
                                orow[ox] += wv * xs[ox - ox_lo];
                        } else {
                            for (int ox = ox_lo; ox < ox_hi; ++ox)
                                orow[ox] += wv * xrow[ox * d.stride - d.pad + kx];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_grad_x(const ConvDims& d, const double* wt, const double* g, double* gx) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int ci = 0; ci < d.ci; ++ci) {
        double* gxc = gx + static_cast<size_t>(ci) * d.h * d.w;
        for (int co = 0; co < d.co; ++co) {
            const double* gc = g + static_cast<size_t>(co) * d.ho * d.wo;
            const double* wk = wt + (static_cast<size_t>(co) * d.ci + ci) * d.kh * d.kw;
            for (int ky = 0; ky < d.kh; ++ky) {
                int oy_lo, oy_hi;
                out_range(d.h, d.stride, d.pad, ky, d.ho, oy_lo, oy_hi);
                for (int kx = 0; kx < d.kw; ++kx) {
                    const double wv = wk[ky * d.kw + kx];
                    int ox_lo, ox_hi;
                    out_range(d.w, d.stride, d.pad, kx, d.wo, ox_lo, ox_hi);
                    for (int oy = oy_lo; oy < oy_hi; ++oy) {
                        double* gxrow = gxc + static_cast<size_t>(oy * d.stride - d.pad + ky) * d.w;
                        const double* grow = gc + static_cast<size_t>(oy) * d.wo;
                        if (d.stride == 1) {
                            double* gxs = gxrow + (ox_lo - d.pad + kx);
                            for (int ox = ox_lo; ox < ox_hi; ++ox)
                                gxs[ox - ox_lo] += wv * grow[ox];
                        } else {
                            for (int ox = ox_lo; ox < ox_hi; ++ox)
                                gxrow[ox * d.stride - d.pad + kx] += wv * grow[ox];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_grad_w(const ConvDims& d, const double* x, const double* g, double* gw) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int co = 0; co < d.co; ++co) {
        const double* gc = g + static_cast<size_t>(co) * d.ho * d.wo;
        for (int ci = 0; ci < d.ci; ++ci) {
            const double* xc = x + static_cast<size_t>(ci) * d.h * d.w;
            double* gwk = gw + (static_cast<size_t>(co) * d.ci + ci) * d.kh * d.kw;
            for (int ky = 0; ky < d.kh; ++ky) {
                int oy_lo, oy_hi;
                out_range(d.h, d.stride, d.pad, ky, d.ho, oy_lo, oy_hi);
                for (int kx = 0; kx < d.kw; ++kx) {
                    int ox_lo, ox_hi;
                    out_range(d.w, d.stride, d.pad, kx, d.wo, ox_lo, ox_hi);
                    // independent accumulator lanes; the summation tree is
                    // fixed, so results stay bit-deterministic
                    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
                    double tail = 0.0;
                    for (int oy = oy_lo; oy < oy_hi; ++oy) {
                        const double* xrow = xc + static_cast<size_t>(oy * d.stride - d.pad + ky) * d.w;
                        const double* grow = gc + static_cast<size_t>(oy) * d.wo;
                        if (d.stride == 1) {
                            const double* __restrict__ xs = xrow + (ox_lo - d.pad + kx);
                            const double* __restrict__ gs = grow + ox_lo;
                            const int n_el = ox_hi - ox_lo;
                            int i = 0;
                            for (; i + 8 <= n_el; i += 8)
                                for (int l = 0; l < 8; ++l) acc[l] += gs[i + l] * xs[i + l];
                            for (; i < n_el; ++i) tail += gs[i] * xs[i];
                        } else {
                            for (int ox = ox_lo; ox < ox_hi; ++ox)
                                tail += grow[ox] * xrow[ox * d.stride - d.pad + kx];
                        }
                    }
                    gwk[ky * d.kw + kx] +=
                        (((acc[0] + acc[1]) + (acc[2] + acc[3])) +
                         ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail;
                }
            }
        }
    }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const ConvDims d = conv_dims(x->value, w->value, b->value, stride, pad);
    Tensor out({d.co, d.ho, d.wo});
    conv2d_forward(d, x->value.values.data(), w->value.values.data(), b->value.values.data(),
                   out.values.data());
    Var n = wrap_node("conv2d", std::move(out), {x, w, b});
    Node* self = n.get();
    n->backprop = [self, d] {
        Node& xn = *self->parents[0];
        Node& wn = *self->parents[1];
        Node& bn = *self->parents[2];
        const double* g = self->grad.data();
        if (xn.requires_grad) {
            xn.ensure_grad();
            conv2d_grad_x(d, wn.value.values.data(), g, xn.grad.data());
        }
        if (wn.requires_grad) {
            wn.ensure_grad();
            conv2d_grad_w(d, xn.value.values.data(), g, wn.grad.data());
        }
        if (bn.requires_grad) {
            bn.ensure_grad();
            for (int co = 0; co < d.co; ++co) {
                const double* gc = g + static_cast<size_t>(co) * d.ho * d.wo;
                const int n_el = d.ho * d.wo;
                double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
                int i = 0;
                for (; i + 4 <= n_el; i += 4) {
                    a0 += gc[i];
                    a1 += gc[i + 1];
                    a2 += gc[i + 2];
                    a3 += gc[i + 3];
                }
                for (; i < n_el; ++i) a0 += gc[i];
                bn.grad[co] += (a0 + a1) + (a2 + a3);
            }
        }
    };
    return n;
}

Var transpose_conv2d(const Var& x, const Var& w, const Var& b) {
    const Tensor& xv = x->value;
    const Tensor& wv = w->value;
    if (xv.shape.size() != 3 || wv.shape.size() != 4 || wv.shape[2] != 2 || wv.shape[3] != 2)
        throw std::invalid_argument("transpose_conv2d: expected x(C,H,W), w(Ci,Co,2,2)");
    const int ci = xv.shape[0], h = xv.shape[1], wd = xv.shape[2];
    const int co = wv.shape[1];
    if (wv.shape[0] != ci) throw std::invalid_argument("transpose_conv2d: kernel Ci != x channels");
    if (b->value.shape != std::vector<int>{co})
        throw std::invalid_argument("transpose_conv2d: bias size != output channels");

    Tensor out({co, 2 * h, 2 * wd});
    const int ho = 2 * h, wo = 2 * wd;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int c = 0; c < co; ++c) {
        double* oc = out.values.data() + static_cast<size_t>(c) * ho * wo;
        std::fill(oc, oc + static_cast<size_t>(ho) * wo, b->value.values[c]);
        for (int ic = 0; ic < ci; ++ic) {
            const double* xc = xv.values.data() + static_cast<size_t>(ic) * h * wd;
            const double* wk = wv.values.data() + (static_cast<size_t>(ic) * co + c) * 4;
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < wd; ++xx) {
                    const double v = xc[y * wd + xx];
                    double* base = oc + static_cast<size_t>(2 * y) * wo + 2 * xx;
                    base[0] += wk[0] * v;
                    base[1] += wk[1] * v;
                    base[wo] += wk[2] * v;
                    base[wo + 1] += wk[3] * v;
                }
        }
    }
    Var n = wrap_node("transpose_conv2d", std::move(out), {x, w, b});
    Node* self = n.get();
    n->backprop = [self, ci, co, h, wd, wo] {
        Node& xn = *self->parents[0];
        Node& wn = *self->parents[1];
        Node& bn = *self->parents[2];
        const double* g = self->grad.data();
        if (xn.requires_grad) {
            xn.ensure_grad();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (int ic = 0; ic < ci; ++ic) {
                double* gxc = xn.grad.data() + static_cast<size_t>(ic) * h * wd;
                for (int c = 0; c < co; ++c) {
                    const double* gc = g + static_cast<size_t>(c) * 2 * h * wo;
                    const double* wk = wn.value.values.data() + (static_cast<size_t>(ic) * co + c) * 4;
                    for (int y = 0; y < h; ++y)
                        for (int xx = 0; xx < wd; ++xx) {
                            const double* base = gc + static_cast<size_t>(2 * y) * wo + 2 * xx;
                            gxc[y * wd + xx] += wk[0] * base[0] + wk[1] * base[1] +
                                                wk[2] * base[wo] + wk[3] * base[wo + 1];
                        }
                }
            }
        }
        if (wn.requires_grad) {
            wn.ensure_grad();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
            for (int ic = 0; ic < ci; ++ic) {
                const double* xc = xn.value.values.data() + static_cast<size_t>(ic) * h * wd;
                for (int c = 0; c < co; ++c) {
                    const double* gc = g + static_cast<size_t>(c) * 2 * h * wo;
                    double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
                    for (int y = 0; y < h; ++y)
                        for (int xx = 0; xx < wd; ++xx) {
                            const double v = xc[y * wd + xx];
                            const double* base = gc + static_cast<size_t>(2 * y) * wo + 2 * xx;
                            a0 += v * base[0];
                            a1 += v * base[1];
                            a2 += v * base[wo];
                            a3 += v * base[wo + 1];
                        }
                    double* gwk = wn.grad.data() + (static_cast<size_t>(ic) * co + c) * 4;
                    gwk[0] += a0;
                    gwk[1] += a1;
                    gwk[2] += a2;
                    gwk[3] += a3;
                }
            }
        }
        if (bn.requires_grad) {
            bn.ensure_grad();
            for (int c = 0; c < co; ++c) {
                const double* gc = g + static_cast<size_t>(c) * 2 * h * wo;
                double acc = 0.0;
                for (size_t i = 0; i < static_cast<size_t>(2 * h) * wo; ++i) acc += gc[i];
                bn.grad[c] += acc;
            }
        }
    };
    return n;
}

Var nearest_upsample2(const Var& x) {
    const Tensor& xv = x->value;
    if (xv.shape.size() != 3) throw std::invalid_argument("nearest_upsample2: expected (C,H,W)");
    const int c = xv.shape[0], h = xv.shape[1], w = xv.shape[2];
    Tensor out({c, 2 * h, 2 * w});
    for (int ch = 0; ch < c; ++ch) {
        const double* src = xv.values.data() + static_cast<size_t>(ch) * h * w;
        double* dst = out.values.data() + static_cast<size_t>(ch) * 4 * h * w;
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                const double v = src[y * w + xx];
                double* base = dst + static_cast<size_t>(2 * y) * 2 * w + 2 * xx;
                base[0] = base[1] = base[2 * w] = base[2 * w + 1] = v;
            }
    }
    Var n = wrap_node("nearest_upsample2", std::move(out), {x});
    Node* self = n.get();
    n->backprop = [self, c, h, w] {
        Node& p = *self->parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (int ch = 0; ch < c; ++ch) {
            double* gp = p.grad.data() + static_cast<size_t>(ch) * h * w;
            const double* g = self->grad.data() + static_cast<size_t>(ch) * 4 * h * w;
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) {
                    const double* base = g + static_cast<size_t>(2 * y) * 2 * w + 2 * xx;
                    gp[y * w + xx] += base[0] + base[1] + base[2 * w] + base[2 * w + 1];
                }
        }
    };
    return n;
}

Var max_pool2(const Var& x) {
    const Tensor& xv = x->value;
    if (xv.shape.size() != 3) throw std::invalid_argument("max_pool2: expected (C,H,W)");
    const int c = xv.shape[0], h = xv.shape[1], w = xv.shape[2];
    if (h % 2 || w % 2) throw std::invalid_argument("max_pool2: spatial dims must be even");
    const int ho = h / 2, wo = w / 2;
    Tensor out({c, ho, wo});
    std::vector<int> argmax(out.numel());
    for (int ch = 0; ch < c; ++ch) {
        const double* src = xv.values.data() + static_cast<size_t>(ch) * h * w;
        double* dst = out.values.data() + static_cast<size_t>(ch) * ho * wo;
        int* am = argmax.data() + static_cast<size_t>(ch) * ho * wo;
        for (int y = 0; y < ho; ++y)
            for (int xx = 0; xx < wo; ++xx) {
                // first maximal element in scan order wins ties
                int best = (2 * y) * w + 2 * xx;
                double bv = src[best];
                const int cand[3] = {(2 * y) * w + 2 * xx + 1, (2 * y + 1) * w + 2 * xx,
                                     (2 * y + 1) * w + 2 * xx + 1};
                for (int k = 0; k < 3; ++k)
                    if (src[cand[k]] > bv) { best = cand[k]; bv = src[cand[k]]; }
                dst[y * wo + xx] = bv;
                am[y * wo + xx] = best;
            }
    }
    Var n = wrap_node("max_pool2", std::move(out), {x});
    n->aux = std::move(argmax);
    Node* self = n.get();
    n->backprop = [self, c, h, w, ho, wo] {
        Node& p = *self->parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (int ch = 0; ch < c; ++ch) {
            double* gp = p.grad.data() + static_cast<size_t>(ch) * h * w;
            const double* g = self->grad.data() + static_cast<size_t>(ch) * ho * wo;
            const int* am = self->aux.data() + static_cast<size_t>(ch) * ho * wo;
            for (int i = 0; i < ho * wo; ++i) gp[am[i]] += g[i];
        }
    };
    return n;
}

Var concat_channels(const Var& a, const Var& b) {
    const Tensor& av = a->value;
    const Tensor& bv = b->value;
    if (av.shape.size() != 3 || bv.shape.size() != 3 || av.shape[1] != bv.shape[1] ||
        av.shape[2] != bv.shape[2])
        throw std::invalid_argument("concat_channels: spatial dims differ");
    const int ca = av.shape[0], cb = bv.shape[0];
    Tensor out({ca + cb, av.shape[1], av.shape[2]});
    std::copy(av.values.begin(), av.values.end(), out.values.begin());
    std::copy(bv.values.begin(), bv.values.end(), out.values.begin() + av.numel());
    Var n = wrap_node("concat", std::move(out), {a, b});
    Node* self = n.get();
    n->backprop = [self] {
        Node& pa = *self->parents[0];
        Node& pb = *self->parents[1];
        const size_t na = pa.value.numel();
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < na; ++i) pa.grad[i] += self->grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < pb.value.numel(); ++i) pb.grad[i] += self->grad[na + i];
        }
    };
    return n;
}

}  // namespace sparsect::ad
