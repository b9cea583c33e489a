#pragma once

#include <Eigen/Core>

#include "dreamif/autodiff.hpp"
#include "dreamif/kernels.hpp"

// Network building blocks on the tape. Heavy contractions go through Eigen
// GEMMs; everything else is simple fused loops.
//
// Weight tensor layout conventions:
//   1x1 conv          (OC, IC, 1)
//   3x3 conv          (OC, IC, 9)     taps row-major ky*3+kx
//   3x3 depthwise     (C, 1, 9)
//   bias              (OC, 1, 1)
//   linear            (OUT, IN, 1)
//   prompt bank       (N*C, hp, wp)   N items of C channels each

namespace dreamif::ad {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

// --- 1x1 convolution (a GEMM over the spatial axis) -------------------------

template <typename T>
Var<T> conv1x1(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const int ic = x.c(), s = x.h() * x.w(), oc = w.c();
    if (w.h() != ic || w.w() != 1) throw std::invalid_argument("conv1x1: weight shape");
    auto n = b.defined() ? make_node<T>(oc, x.h(), x.w(), {x, w, b})
                         : make_node<T>(oc, x.h(), x.w(), {x, w});
    {
        CMapRM<T> W(w.value().data(), oc, ic);
        CMapRM<T> X(x.value().data(), ic, s);
        MapRM<T> O(n->value.data(), oc, s);
        O.noalias() = W * X;
        if (b.defined())
            for (int o = 0; o < oc; ++o) O.row(o).array() += b.value().v[o];
    }
    if (n->requires_grad) {
        auto xn = x.node(), wn = w.node();
        auto bn = b.defined() ? b.node() : nullptr;
        VarNode<T>* self = n.get();
        n->backprop = [xn, wn, bn, self, ic, oc, s]() {
            CMapRM<T> dO(self->grad.data(), oc, s);
            if (xn->requires_grad) {
                if (xn->grad.v.empty()) xn->grad = Tensor<T>(xn->value.c, xn->value.h, xn->value.w);
                CMapRM<T> W(wn->value.data(), oc, ic);
                MapRM<T> dX(xn->grad.data(), ic, s);
                dX.noalias() += W.transpose() * dO;
            }
            if (wn->requires_grad) {
                if (wn->grad.v.empty()) wn->grad = Tensor<T>(oc, ic, 1);
                CMapRM<T> X(xn->value.data(), ic, s);
                MapRM<T> dW(wn->grad.data(), oc, ic);
                dW.noalias() += dO * X.transpose();
            }
            if (bn && bn->requires_grad) {
                if (bn->grad.v.empty()) bn->grad = Tensor<T>(oc, 1, 1);
                for (int o = 0; o < oc; ++o) bn->grad.v[o] += dO.row(o).sum();
            }
        };
    }
    return Var<T>(n);
}

// --- 3x3 convolution, zero padding, via im2col ------------------------------

template <typename T>
Tensor<T> im2col3x3(const Tensor<T>& x) {
    const int ic = x.c, h = x.h, w = x.w;
    Tensor<T> col(ic * 9, h, w);
    for (int c = 0; c < ic; ++c)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                T* dst0 = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * h * w;
                for (int y = 0; y < h; ++y) {
                    T* dst = dst0 + static_cast<std::size_t>(y) * w;
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) {
                        std::fill(dst, dst + w, T(0));
                        continue;
                    }
                    const T* src = x.data() + (static_cast<std::size_t>(c) * h + sy) * w;
                    const int x0 = std::max(0, 1 - kx);        // first valid output x
                    const int x1 = std::min(w, w + 1 - kx);    // one past last valid
                    for (int xx = 0; xx < x0; ++xx) dst[xx] = T(0);
                    if (x1 > x0) std::copy(src + x0 + kx - 1, src + x1 + kx - 1, dst + x0);
                    for (int xx = x1; xx < w; ++xx) dst[xx] = T(0);
                }
            }
    return col;
}

template <typename T>
void col2im3x3_add(const Tensor<T>& col, Tensor<T>& dx) {
    const int ic = dx.c, h = dx.h, w = dx.w;
    for (int c = 0; c < ic; ++c)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                const T* src0 = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * h * w;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    const T* src = src0 + static_cast<std::size_t>(y) * w;
                    T* dst = dx.data() + (static_cast<std::size_t>(c) * h + sy) * w;
                    const int x0 = std::max(0, 1 - kx);
                    const int x1 = std::min(w, w + 1 - kx);
                    for (int xx = x0; xx < x1; ++xx) dst[xx + kx - 1] += src[xx];
                }
            }
}

template <typename T>
Var<T> conv3x3(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const int ic = x.c(), s = x.h() * x.w(), oc = w.c();
    if (w.h() != ic || w.w() != 9) throw std::invalid_argument("conv3x3: weight shape");
    auto n = b.defined() ? make_node<T>(oc, x.h(), x.w(), {x, w, b})
                         : make_node<T>(oc, x.h(), x.w(), {x, w});
    Tensor<T> col = im2col3x3(x.value());
    {
        CMapRM<T> W(w.value().data(), oc, ic * 9);
        CMapRM<T> C(col.data(), ic * 9, s);
        MapRM<T> O(n->value.data(), oc, s);
        O.noalias() = W * C;
        if (b.defined())
            for (int o = 0; o < oc; ++o) O.row(o).array() += b.value().v[o];
    }
    if (n->requires_grad) {
        auto xn = x.node(), wn = w.node();
        auto bn = b.defined() ? b.node() : nullptr;
        VarNode<T>* self = n.get();
        auto saved = std::make_shared<Tensor<T>>(std::move(col));
        n->backprop = [xn, wn, bn, self, saved, ic, oc, s]() {
            CMapRM<T> dO(self->grad.data(), oc, s);
            if (wn->requires_grad) {
                if (wn->grad.v.empty()) wn->grad = Tensor<T>(oc, ic, 9);
                CMapRM<T> C(saved->data(), ic * 9, s);
                MapRM<T> dW(wn->grad.data(), oc, ic * 9);
                dW.noalias() += dO * C.transpose();
            }
            if (xn->requires_grad) {
                if (xn->grad.v.empty()) xn->grad = Tensor<T>(xn->value.c, xn->value.h, xn->value.w);
                Tensor<T> dcol(ic * 9, xn->value.h, xn->value.w);
                CMapRM<T> W(wn->value.data(), oc, ic * 9);
                MapRM<T> dC(dcol.data(), ic * 9, s);
                dC.noalias() = W.transpose() * dO;
                col2im3x3_add(dcol, xn->grad);
            }
            if (bn && bn->requires_grad) {
                if (bn->grad.v.empty()) bn->grad = Tensor<T>(oc, 1, 1);
                for (int o = 0; o < oc; ++o) bn->grad.v[o] += dO.row(o).sum();
            }
        };
    }
    return Var<T>(n);
}

// --- 3x3 depthwise convolution, zero padding --------------------------------

template <typename T>
Var<T> dwconv3x3(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const int c = x.c(), h = x.h(), ww = x.w();
    if (w.c() != c || w.h() != 1 || w.w() != 9) throw std::invalid_argument("dwconv3x3: weight shape");
    auto n = b.defined() ? make_node<T>(c, h, ww, {x, w, b})
                         : make_node<T>(c, h, ww, {x, w});
    const T* xv = x.value().data();
    T* ov = n->value.data();
    for (int ch = 0; ch < c; ++ch) {
        const T* kw = w.value().data() + static_cast<std::size_t>(ch) * 9;
        const T bias = b.defined() ? b.value().v[ch] : T(0);
        const T* xp = xv + static_cast<std::size_t>(ch) * h * ww;
        T* op = ov + static_cast<std::size_t>(ch) * h * ww;
        for (int y = 0; y < h; ++y) {
            T* orow = op + static_cast<std::size_t>(y) * ww;
            for (int xx = 0; xx < ww; ++xx) orow[xx] = bias;
            for (int ky = 0; ky < 3; ++ky) {
                const int sy = y + ky - 1;
                if (sy < 0 || sy >= h) continue;
                const T* xrow = xp + static_cast<std::size_t>(sy) * ww;
                for (int kx = 0; kx < 3; ++kx) {
                    const T kv = kw[ky * 3 + kx];
                    const int x0 = std::max(0, 1 - kx);
                    const int x1 = std::min(ww, ww + 1 - kx);
                    const T* src = xrow + kx - 1;
                    for (int xx = x0; xx < x1; ++xx) orow[xx] += kv * src[xx];
                }
            }
        }
    }
    if (n->requires_grad) {
        auto xn = x.node(), wn = w.node();
        auto bn = b.defined() ? b.node() : nullptr;
        VarNode<T>* self = n.get();
        n->backprop = [xn, wn, bn, self, c, h, ww]() {
            const T* g = self->grad.data();
            if (xn->requires_grad && xn->grad.v.empty())
                xn->grad = Tensor<T>(xn->value.c, xn->value.h, xn->value.w);
            if (wn->requires_grad && wn->grad.v.empty()) wn->grad = Tensor<T>(c, 1, 9);
            for (int ch = 0; ch < c; ++ch) {
                const T* gp = g + static_cast<std::size_t>(ch) * h * ww;
                const T* xp = xn->value.data() + static_cast<std::size_t>(ch) * h * ww;
                const T* kw = wn->value.data() + static_cast<std::size_t>(ch) * 9;
                for (int y = 0; y < h; ++y) {
                    const T* grow = gp + static_cast<std::size_t>(y) * ww;
                    for (int ky = 0; ky < 3; ++ky) {
                        const int sy = y + ky - 1;
                        if (sy < 0 || sy >= h) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int x0 = std::max(0, 1 - kx);
                            const int x1 = std::min(ww, ww + 1 - kx);
                            if (xn->requires_grad) {
                                T* dxrow = xn->grad.data() +
                                           (static_cast<std::size_t>(ch) * h + sy) * ww + kx - 1;
                                const T kv = kw[ky * 3 + kx];
                                for (int xx = x0; xx < x1; ++xx) dxrow[xx] += kv * grow[xx];
                            }
                            if (wn->requires_grad) {
                                const T* xrow = xp + static_cast<std::size_t>(sy) * ww + kx - 1;
                                T acc = T(0);
                                for (int xx = x0; xx < x1; ++xx) acc += xrow[xx] * grow[xx];
                                wn->grad.v[static_cast<std::size_t>(ch) * 9 + ky * 3 + kx] += acc;
                            }
                        }
                    }
                }
                if (bn && bn->requires_grad) {
                    if (bn->grad.v.empty()) bn->grad = Tensor<T>(c, 1, 1);
                    T acc = T(0);
                    for (int i = 0; i < h * ww; ++i) acc += gp[i];
                    bn->grad.v[ch] += acc;
                }
            }
        };
    }
    return Var<T>(n);
}

// --- per-location layer norm over channels ----------------------------------

template <typename T>
Var<T> layer_norm_channels(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
    const int c = x.c(), s = x.h() * x.w();
    if (gamma.c() != c || beta.c() != c) throw std::invalid_argument("layer_norm: affine shape");
    auto n = make_node<T>(c, x.h(), x.w(), {x, gamma, beta});
    auto stats = std::make_shared<std::vector<T>>(static_cast<std::size_t>(s) * 2);  // mu, inv
    {
        T* mu = stats->data();
        T* inv = stats->data() + s;
        std::fill(mu, mu + s, T(0));
        const T* xv = x.value().data();
        for (int ch = 0; ch < c; ++ch) {
            const T* xp = xv + static_cast<std::size_t>(ch) * s;
            for (int i = 0; i < s; ++i) mu[i] += xp[i];
        }
        const T invc = T(1) / static_cast<T>(c);
        for (int i = 0; i < s; ++i) mu[i] *= invc;
        std::fill(inv, inv + s, T(0));
        for (int ch = 0; ch < c; ++ch) {
            const T* xp = xv + static_cast<std::size_t>(ch) * s;
            for (int i = 0; i < s; ++i) {
                const T d = xp[i] - mu[i];
                inv[i] += d * d;
            }
        }
        for (int i = 0; i < s; ++i) inv[i] = T(1) / std::sqrt(inv[i] * invc + eps);
        T* ov = n->value.data();
        for (int ch = 0; ch < c; ++ch) {
            const T g = gamma.value().v[ch], bb = beta.value().v[ch];
            const T* xp = xv + static_cast<std::size_t>(ch) * s;
            T* op = ov + static_cast<std::size_t>(ch) * s;
            for (int i = 0; i < s; ++i) op[i] = g * (xp[i] - mu[i]) * inv[i] + bb;
        }
    }
    if (n->requires_grad) {
        auto xn = x.node(), gn = gamma.node(), bn = beta.node();
        VarNode<T>* self = n.get();
        n->backprop = [xn, gn, bn, self, stats, c, s]() {
            const T* mu = stats->data();
            const T* inv = stats->data() + s;
            const T* xv = xn->value.data();
            const T* dy = self->grad.data();
            // Per-location sums of gamma*dy and gamma*dy*xhat.
            std::vector<T> sg(s, T(0)), sgx(s, T(0));
            for (int ch = 0; ch < c; ++ch) {
                const T g = gn->value.v[ch];
                const T* dyp = dy + static_cast<std::size_t>(ch) * s;
                const T* xp = xv + static_cast<std::size_t>(ch) * s;
                for (int i = 0; i < s; ++i) {
                    const T gd = g * dyp[i];
                    sg[i] += gd;
                    sgx[i] += gd * (xp[i] - mu[i]) * inv[i];
                }
            }
            const T invc = T(1) / static_cast<T>(c);
            if (xn->requires_grad) {
                if (xn->grad.v.empty()) xn->grad = Tensor<T>(xn->value.c, xn->value.h, xn->value.w);
                for (int ch = 0; ch < c; ++ch) {
                    const T g = gn->value.v[ch];
                    const T* dyp = dy + static_cast<std::size_t>(ch) * s;
                    const T* xp = xv + static_cast<std::size_t>(ch) * s;
                    T* dxp = xn->grad.data() + static_cast<std::size_t>(ch) * s;
                    for (int i = 0; i < s; ++i) {
                        const T xhat = (xp[i] - mu[i]) * inv[i];
                        dxp[i] += inv[i] * (g * dyp[i] - invc * sg[i] - xhat * invc * sgx[i]);
                    }
                }
            }
            if (gn->requires_grad) {
                if (gn->grad.v.empty()) gn->grad = Tensor<T>(c, 1, 1);
                for (int ch = 0; ch < c; ++ch) {
                    const T* dyp = dy + static_cast<std::size_t>(ch) * s;
                    const T* xp = xv + static_cast<std::size_t>(ch) * s;
                    T acc = T(0);
                    for (int i = 0; i < s; ++i) acc += dyp[i] * (xp[i] - mu[i]) * inv[i];
                    gn->grad.v[ch] += acc;
                }
            }
            if (bn->requires_grad) {
                if (bn->grad.v.empty()) bn->grad = Tensor<T>(c, 1, 1);
                for (int ch = 0; ch < c; ++ch) {
                    const T* dyp = dy + static_cast<std::size_t>(ch) * s;
                    T acc = T(0);
                    for (int i = 0; i < s; ++i) acc += dyp[i];
                    bn->grad.v[ch] += acc;
                }
            }
        };
    }
    return Var<T>(n);
}

// --- channel-wise multi-head attention ---------------------------------------
// Per head: rows of q and k (one row per channel, length H*W) are L2
// normalized, logits = temp * qn kn^T, rows softmaxed, out = A v.

template <typename T>
Var<T> channel_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                         const Var<T>& temp, int heads) {
    const int c = q.c(), s = q.h() * q.w();
    if (k.c() != c || v.c() != c || c % heads != 0 || temp.c() != heads)
        throw std::invalid_argument("channel_attention: shape/head mismatch");
    const int cph = c / heads;
    auto n = make_node<T>(c, q.h(), q.w(), {q, k, v, temp});
    auto attn = std::make_shared<Tensor<T>>(heads, cph, cph);
    auto norms = std::make_shared<std::vector<T>>(static_cast<std::size_t>(c) * 2);  // invq, invk

    auto normalize_rows = [s](const T* src, T* dst, T* invn, int rows) {
        for (int r = 0; r < rows; ++r) {
            const T* a = src + static_cast<std::size_t>(r) * s;
            T dot = T(0);
            for (int i = 0; i < s; ++i) dot += a[i] * a[i];
            const T nv = std::sqrt(dot);
            const T iv = T(1) / std::max(nv, T(1e-12));
            invn[r] = iv;
            T* d = dst + static_cast<std::size_t>(r) * s;
            for (int i = 0; i < s; ++i) d[i] = a[i] * iv;
        }
    };

    {
        Tensor<T> qn(c, q.h(), q.w()), kn(c, q.h(), q.w());
        normalize_rows(q.value().data(), qn.data(), norms->data(), c);
        normalize_rows(k.value().data(), kn.data(), norms->data() + c, c);
        for (int hd = 0; hd < heads; ++hd) {
            CMapRM<T> Q(qn.data() + static_cast<std::size_t>(hd) * cph * s, cph, s);
            CMapRM<T> K(kn.data() + static_cast<std::size_t>(hd) * cph * s, cph, s);
            CMapRM<T> V(v.value().data() + static_cast<std::size_t>(hd) * cph * s, cph, s);
            MapRM<T> A(attn->data() + static_cast<std::size_t>(hd) * cph * cph, cph, cph);
            A.noalias() = Q * K.transpose() * temp.value().v[hd];
            for (int r = 0; r < cph; ++r) {
                T mx = A(r, 0);
                for (int j = 1; j < cph; ++j) mx = std::max(mx, A(r, j));
                T den = T(0);
                for (int j = 0; j < cph; ++j) {
                    A(r, j) = std::exp(A(r, j) - mx);
                    den += A(r, j);
                }
                for (int j = 0; j < cph; ++j) A(r, j) /= den;
            }
            MapRM<T> O(n->value.data() + static_cast<std::size_t>(hd) * cph * s, cph, s);
            O.noalias() = A * V;
        }
    }
    if (n->requires_grad) {
        auto qn_ = q.node(), kn_ = k.node(), vn_ = v.node(), tn_ = temp.node();
        VarNode<T>* self = n.get();
        n->backprop = [qn_, kn_, vn_, tn_, self, attn, norms, normalize_rows, heads, cph, s, c]() {
            // Recompute normalized rows from saved inverse norms.
            Tensor<T> qn(c, 1, s), kn(c, 1, s);
            for (int r = 0; r < c; ++r) {
                const T iq = (*norms)[r], ik = (*norms)[c + r];
                const T* qs = qn_->value.data() + static_cast<std::size_t>(r) * s;
                const T* ks = kn_->value.data() + static_cast<std::size_t>(r) * s;
                T* qd = qn.data() + static_cast<std::size_t>(r) * s;
                T* kd = kn.data() + static_cast<std::size_t>(r) * s;
                for (int i = 0; i < s; ++i) {
                    qd[i] = qs[i] * iq;
                    kd[i] = ks[i] * ik;
                }
            }
            auto ensure = [](std::shared_ptr<VarNode<T>> nd) {
                if (nd->grad.v.empty()) nd->grad = Tensor<T>(nd->value.c, nd->value.h, nd->value.w);
            };
            if (qn_->requires_grad) ensure(qn_);
            if (kn_->requires_grad) ensure(kn_);
            if (vn_->requires_grad) ensure(vn_);
            if (tn_->requires_grad) ensure(tn_);
            for (int hd = 0; hd < heads; ++hd) {
                const std::size_t off = static_cast<std::size_t>(hd) * cph * s;
                CMapRM<T> dO(self->grad.data() + off, cph, s);
                CMapRM<T> A(attn->data() + static_cast<std::size_t>(hd) * cph * cph, cph, cph);
                CMapRM<T> V(vn_->value.data() + off, cph, s);
                CMapRM<T> Qn(qn.data() + off, cph, s);
                CMapRM<T> Kn(kn.data() + off, cph, s);
                const T tau = tn_->value.v[hd];

                if (vn_->requires_grad) {
                    MapRM<T> dV(vn_->grad.data() + off, cph, s);
                    dV.noalias() += A.transpose() * dO;
                }
                MatRM<T> dA = dO * V.transpose();                  // cph x cph
                MatRM<T> dL(cph, cph);                             // softmax backward
                for (int r = 0; r < cph; ++r) {
                    T dot = T(0);
                    for (int j = 0; j < cph; ++j) dot += dA(r, j) * A(r, j);
                    for (int j = 0; j < cph; ++j) dL(r, j) = A(r, j) * (dA(r, j) - dot);
                }
                if (tn_->requires_grad) {
                    MatRM<T> L0 = Qn * Kn.transpose();
                    T acc = T(0);
                    for (int r = 0; r < cph; ++r)
                        for (int j = 0; j < cph; ++j) acc += dL(r, j) * L0(r, j);
                    tn_->grad.v[hd] += acc;
                }
                // Through the row normalization: d(x/|x|) = (g - xn (xn.g)) / |x|.
                if (qn_->requires_grad) {
                    MatRM<T> dQn = dL * Kn * tau;                  // cph x s
                    for (int r = 0; r < cph; ++r) {
                        const int row = hd * cph + r;
                        const T iq = (*norms)[row];
                        const T* xnr = qn.data() + static_cast<std::size_t>(row) * s;
                        T dot = T(0);
                        for (int i = 0; i < s; ++i) dot += dQn(r, i) * xnr[i];
                        T* dst = qn_->grad.data() + static_cast<std::size_t>(row) * s;
                        for (int i = 0; i < s; ++i) dst[i] += iq * (dQn(r, i) - xnr[i] * dot);
                    }
                }
                if (kn_->requires_grad) {
                    MatRM<T> dKn = dL.transpose() * Qn * tau;      // cph x s
                    for (int r = 0; r < cph; ++r) {
                        const int row = hd * cph + r;
                        const T ik = (*norms)[c + row];
                        const T* xnr = kn.data() + static_cast<std::size_t>(row) * s;
                        T dot = T(0);
                        for (int i = 0; i < s; ++i) dot += dKn(r, i) * xnr[i];
                        T* dst = kn_->grad.data() + static_cast<std::size_t>(row) * s;
                        for (int i = 0; i < s; ++i) dst[i] += ik * (dKn(r, i) - xnr[i] * dot);
                    }
                }
            }
        };
    }
    return Var<T>(n);
}

// --- global average pool -> (C,1,1) -----------------------------------------

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
    const int c = x.c(), s = x.h() * x.w();
    auto n = make_node<T>(c, 1, 1, {x});
    const T inv = T(1) / static_cast<T>(s);
    for (int ch = 0; ch < c; ++ch) {
        const T* xp = x.value().data() + static_cast<std::size_t>(ch) * s;
        T acc = T(0);
        for (int i = 0; i < s; ++i) acc += xp[i];
        n->value.v[ch] = acc * inv;
    }
    if (n->requires_grad) {
        auto xn = x.node();
        VarNode<T>* self = n.get();
        n->backprop = [xn, self, c, s, inv]() {
            if (xn->grad.v.empty()) xn->grad = Tensor<T>(xn->value.c, xn->value.h, xn->value.w);
            for (int ch = 0; ch < c; ++ch) {
                const T g = self->grad.v[ch] * inv;
                T* dst = xn->grad.data() + static_cast<std::size_t>(ch) * s;
                for (int i = 0; i < s; ++i) dst[i] += g;
            }
        };
    }
    return Var<T>(n);
}

// --- fully connected on a (IN,1,1) vector ------------------------------------

template <typename T>
Var<T> linear_vec(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const int in = x.c(), out = w.c();
    if (x.h() != 1 || x.w() != 1 || w.h() != in || w.w() != 1)
        throw std::invalid_argument("linear_vec: shape mismatch");
    auto n = b.defined() ? make_node<T>(out, 1, 1, {x, w, b}) : make_node<T>(out, 1, 1, {x, w});
    for (int o = 0; o < out; ++o) {
        const T* wr = w.value().data() + static_cast<std::size_t>(o) * in;
        T acc = b.defined() ? b.value().v[o] : T(0);
        for (int i = 0; i < in; ++i) acc += wr[i] * x.value().v[i];
        n->value.v[o] = acc;
    }
    if (n->requires_grad) {
        auto xn = x.node(), wn = w.node();
        auto bn = b.defined() ? b.node() : nullptr;
        VarNode<T>* self = n.get();
        n->backprop = [xn, wn, bn, self, in, out]() {
            if (xn->requires_grad) {
                if (xn->grad.v.empty()) xn->grad = Tensor<T>(in, 1, 1);
                for (int o = 0; o < out; ++o) {
                    const T g = self->grad.v[o];
                    const T* wr = wn->value.data() + static_cast<std::size_t>(o) * in;
                    for (int i = 0; i < in; ++i) xn->grad.v[i] += g * wr[i];
                }
            }
            if (wn->requires_grad) {
                if (wn->grad.v.empty()) wn->grad = Tensor<T>(out, in, 1);
                for (int o = 0; o < out; ++o) {
                    const T g = self->grad.v[o];
                    T* wr = wn->grad.data() + static_cast<std::size_t>(o) * in;
                    for (int i = 0; i < in; ++i) wr[i] += g * xn->value.v[i];
                }
            }
            if (bn && bn->requires_grad) {
                if (bn->grad.v.empty()) bn->grad = Tensor<T>(out, 1, 1);
                for (int o = 0; o < out; ++o) bn->grad.v[o] += self->grad.v[o];
            }
        };
    }
    return Var<T>(n);
}

// --- weighted mix of a bank of (C,hp,wp) items --------------------------------

template <typename T>
Var<T> bank_mix(const Var<T>& weights, const Var<T>& bank, int c) {
    const int nitems = weights.c();
    if (bank.c() != nitems * c) throw std::invalid_argument("bank_mix: bank/item shape mismatch");
    const std::size_t item = static_cast<std::size_t>(c) * bank.h() * bank.w();
    auto n = make_node<T>(c, bank.h(), bank.w(), {weights, bank});
    std::fill(n->value.v.begin(), n->value.v.end(), T(0));
    for (int it = 0; it < nitems; ++it) {
        const T wv = weights.value().v[it];
        const T* src = bank.value().data() + it * item;
        for (std::size_t i = 0; i < item; ++i) n->value.v[i] += wv * src[i];
    }
    if (n->requires_grad) {
        auto wn = weights.node(), bn = bank.node();
        VarNode<T>* self = n.get();
        n->backprop = [wn, bn, self, nitems, item]() {
            if (wn->requires_grad) {
                if (wn->grad.v.empty()) wn->grad = Tensor<T>(nitems, 1, 1);
                for (int it = 0; it < nitems; ++it) {
                    const T* src = bn->value.data() + it * item;
                    T acc = T(0);
                    for (std::size_t i = 0; i < item; ++i) acc += src[i] * self->grad.v[i];
                    wn->grad.v[it] += acc;
                }
            }
            if (bn->requires_grad) {
                if (bn->grad.v.empty()) bn->grad = Tensor<T>(bn->value.c, bn->value.h, bn->value.w);
                for (int it = 0; it < nitems; ++it) {
                    const T wv = wn->value.v[it];
                    T* dst = bn->grad.data() + it * item;
                    for (std::size_t i = 0; i < item; ++i) dst[i] += wv * self->grad.v[i];
                }
            }
        };
    }
    return Var<T>(n);
}

// --- bilinear resize (half-pixel sampling, clamped) ---------------------------

template <typename T>
void resize_axis_weights(int in, int out, std::vector<int>& i0, std::vector<int>& i1, std::vector<T>& t) {
    i0.resize(out);
    i1.resize(out);
    t.resize(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        src = std::min(std::max(src, 0.0), static_cast<double>(in - 1));
        const int lo = static_cast<int>(src);
        i0[o] = lo;
        i1[o] = std::min(lo + 1, in - 1);
        t[o] = static_cast<T>(src - lo);
    }
}

template <typename T>
Var<T> bilinear_resize(const Var<T>& x, int oh, int ow) {
    const int c = x.c(), ih = x.h(), iw = x.w();
    auto n = make_node<T>(c, oh, ow, {x});
    std::vector<int> y0, y1, x0, x1;
    std::vector<T> ty, tx;
    resize_axis_weights<T>(ih, oh, y0, y1, ty);
    resize_axis_weights<T>(iw, ow, x0, x1, tx);
    for (int ch = 0; ch < c; ++ch) {
        const T* xp = x.value().data() + static_cast<std::size_t>(ch) * ih * iw;
        T* op = n->value.data() + static_cast<std::size_t>(ch) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            const T* r0 = xp + static_cast<std::size_t>(y0[y]) * iw;
            const T* r1 = xp + static_cast<std::size_t>(y1[y]) * iw;
            const T wy = ty[y];
            T* orow = op + static_cast<std::size_t>(y) * ow;
            for (int xx = 0; xx < ow; ++xx) {
                const T a = r0[x0[xx]] + (r0[x1[xx]] - r0[x0[xx]]) * tx[xx];
                const T b = r1[x0[xx]] + (r1[x1[xx]] - r1[x0[xx]]) * tx[xx];
                orow[xx] = a + (b - a) * wy;
            }
        }
    }
    if (n->requires_grad) {
        auto xn = x.node();
        VarNode<T>* self = n.get();
        n->backprop = [xn, self, c, ih, iw, oh, ow, y0, y1, ty, x0, x1, tx]() {
            if (xn->grad.v.empty()) xn->grad = Tensor<T>(c, ih, iw);
            for (int ch = 0; ch < c; ++ch) {
                const T* gp = self->grad.data() + static_cast<std::size_t>(ch) * oh * ow;
                T* dp = xn->grad.data() + static_cast<std::size_t>(ch) * ih * iw;
                for (int y = 0; y < oh; ++y) {
                    const T wy = ty[y];
                    for (int xx = 0; xx < ow; ++xx) {
                        const T g = gp[static_cast<std::size_t>(y) * ow + xx];
                        const T wx = tx[xx];
                        dp[static_cast<std::size_t>(y0[y]) * iw + x0[xx]] += g * (T(1) - wy) * (T(1) - wx);
                        dp[static_cast<std::size_t>(y0[y]) * iw + x1[xx]] += g * (T(1) - wy) * wx;
                        dp[static_cast<std::size_t>(y1[y]) * iw + x0[xx]] += g * wy * (T(1) - wx);
                        dp[static_cast<std::size_t>(y1[y]) * iw + x1[xx]] += g * wy * wx;
                    }
                }
            }
        };
    }
    return Var<T>(n);
}

// --- fixed-kernel single-plane convolution, valid region ----------------------
// Used by the structural-similarity window; the kernel carries no gradient.

template <typename T>
Var<T> conv_const_valid(const Var<T>& x, const std::vector<T>& kernel, int ksize) {
    if (x.c() != 1) throw std::invalid_argument("conv_const_valid: single-plane input only");
    const int ih = x.h(), iw = x.w();
    const int oh = ih - ksize + 1, ow = iw - ksize + 1;
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv_const_valid: input smaller than kernel");
    auto n = make_node<T>(1, oh, ow, {x});
    const T* xp = x.value().data();
    for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx) {
            T acc = T(0);
            for (int ky = 0; ky < ksize; ++ky) {
                const T* row = xp + static_cast<std::size_t>(y + ky) * iw + xx;
                const T* kr = kernel.data() + static_cast<std::size_t>(ky) * ksize;
                for (int kx = 0; kx < ksize; ++kx) acc += row[kx] * kr[kx];
            }
            n->value.v[static_cast<std::size_t>(y) * ow + xx] = acc;
        }
    if (n->requires_grad) {
        auto xn = x.node();
        VarNode<T>* self = n.get();
        n->backprop = [xn, self, kernel, ksize, ih, iw, oh, ow]() {
            if (xn->grad.v.empty()) xn->grad = Tensor<T>(1, ih, iw);
            for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx) {
                    const T g = self->grad.v[static_cast<std::size_t>(y) * ow + xx];
                    for (int ky = 0; ky < ksize; ++ky) {
                        T* row = xn->grad.data() + static_cast<std::size_t>(y + ky) * iw + xx;
                        const T* kr = kernel.data() + static_cast<std::size_t>(ky) * ksize;
                        for (int kx = 0; kx < ksize; ++kx) row[kx] += g * kr[kx];
                    }
                }
        };
    }
    return Var<T>(n);
}

// --- edge pair on the tape (reflect padding, fixed kernels) -------------------

template <typename T>
Var<T> sobel_pair(const Var<T>& x) {
    if (x.c() != 1) throw std::invalid_argument("sobel_pair: single-plane input only");
    const int h = x.h(), w = x.w();
    auto n = make_node<T>(2, h, w, {x});
    kernels::sobel_plane(x.value().data(), h, w, n->value.data(),
                         n->value.data() + static_cast<std::size_t>(h) * w);
    if (n->requires_grad) {
        auto xn = x.node();
        VarNode<T>* self = n.get();
        n->backprop = [xn, self, h, w]() {
            if (xn->grad.v.empty()) xn->grad = Tensor<T>(1, h, w);
            const std::size_t plane = static_cast<std::size_t>(h) * w;
            const T* ggx = self->grad.data();
            const T* ggy = self->grad.data() + plane;
            T* dst = xn->grad.data();
            // Adjoint of the correlation: scatter each tap through the same
            // reflected index map.
            for (int y = 0; y < h; ++y) {
                const int ys[3] = {kernels::reflect(y - 1, h), y, kernels::reflect(y + 1, h)};
                for (int xx = 0; xx < w; ++xx) {
                    const int xs[3] = {kernels::reflect(xx - 1, w), xx, kernels::reflect(xx + 1, w)};
                    const T gx = ggx[static_cast<std::size_t>(y) * w + xx];
                    const T gy = ggy[static_cast<std::size_t>(y) * w + xx];
                    // gx taps: rows (1,2,1) x cols (-1,0,+1)
                    dst[static_cast<std::size_t>(ys[0]) * w + xs[2]] += gx;
                    dst[static_cast<std::size_t>(ys[0]) * w + xs[0]] -= gx;
                    dst[static_cast<std::size_t>(ys[1]) * w + xs[2]] += T(2) * gx;
                    dst[static_cast<std::size_t>(ys[1]) * w + xs[0]] -= T(2) * gx;
                    dst[static_cast<std::size_t>(ys[2]) * w + xs[2]] += gx;
                    dst[static_cast<std::size_t>(ys[2]) * w + xs[0]] -= gx;
                    // gy taps: cols (1,2,1) x rows (-1,+1)
                    dst[static_cast<std::size_t>(ys[2]) * w + xs[0]] += gy;
                    dst[static_cast<std::size_t>(ys[0]) * w + xs[0]] -= gy;
                    dst[static_cast<std::size_t>(ys[2]) * w + xs[1]] += T(2) * gy;
                    dst[static_cast<std::size_t>(ys[0]) * w + xs[1]] -= T(2) * gy;
                    dst[static_cast<std::size_t>(ys[2]) * w + xs[2]] += gy;
                    dst[static_cast<std::size_t>(ys[0]) * w + xs[2]] -= gy;
                }
            }
        };
    }
    return Var<T>(n);
}

// --- fixed 3x3 color matrix with per-channel offsets --------------------------

template <typename T>
Var<T> color_matrix(const Var<T>& x, const std::array<std::array<T, 3>, 3>& m,
                    const std::array<T, 3>& off) {
    if (x.c() != 3) throw std::invalid_argument("color_matrix: need 3 channels");
    const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
    auto n = make_node<T>(3, x.h(), x.w(), {x});
    const T* p0 = x.value().data();
    const T* p1 = p0 + plane;
    const T* p2 = p0 + 2 * plane;
    for (int c = 0; c < 3; ++c) {
        T* op = n->value.data() + c * plane;
        const T m0 = m[c][0], m1 = m[c][1], m2 = m[c][2], o = off[c];
        for (std::size_t i = 0; i < plane; ++i) op[i] = m0 * p0[i] + m1 * p1[i] + m2 * p2[i] + o;
    }
    if (n->requires_grad) {
        auto xn = x.node();
        VarNode<T>* self = n.get();
        n->backprop = [xn, self, m, plane]() {
            if (xn->grad.v.empty()) xn->grad = Tensor<T>(3, xn->value.h, xn->value.w);
            for (int j = 0; j < 3; ++j) {
                T* dst = xn->grad.data() + j * plane;
                for (int c = 0; c < 3; ++c) {
                    const T* g = self->grad.data() + c * plane;
                    const T mc = m[c][j];
                    for (std::size_t i = 0; i < plane; ++i) dst[i] += mc * g[i];
                }
            }
        };
    }
    return Var<T>(n);
}

}  // namespace dreamif::ad
