#pragma once

#include <string>

#include "dreamif/image.hpp"
#include "dreamif/nn_ops.hpp"

// Training objective: the fused image should carry the brighter of the two
// source intensities, the stronger of the two edge fields, the visible image's
// chroma, and structural agreement with both sources. All four terms are
// plain means, combined with unit weights.

namespace dreamif {

// (3,H,W) RGB -> (3,H,W) YCbCr, full range, no clamping (stays on the tape).
template <typename T>
ad::Var<T> ycbcr_op(const ad::Var<T>& rgb) {
    using kernels::kCbScale;
    using kernels::kCrScale;
    using kernels::kYB;
    using kernels::kYG;
    using kernels::kYR;
    const std::array<std::array<T, 3>, 3> m{{
        {T(kYR), T(kYG), T(kYB)},
        {T(-kYR * kCbScale), T(-kYG * kCbScale), T((1.0 - kYB) * kCbScale)},
        {T((1.0 - kYR) * kCrScale), T(-kYG * kCrScale), T(-kYB * kCrScale)},
    }};
    const std::array<T, 3> off{T(0), T(0.5), T(0.5)};
    return ad::color_matrix(rgb, m, off);
}

template <typename T>
ad::Var<T> luma_op(const ad::Var<T>& rgb) {
    return ad::slice_channels(ycbcr_op(rgb), 0, 1);
}

// Smoothed edge magnitude of a single plane; the tiny floor keeps the square
// root differentiable at zero-gradient pixels.
template <typename T>
ad::Var<T> grad_magnitude(const ad::Var<T>& plane) {
    auto g = ad::sobel_pair(plane);
    auto gx = ad::slice_channels(g, 0, 1);
    auto gy = ad::slice_channels(g, 1, 1);
    return ad::sqrt(ad::add_scalar(ad::add(ad::square(gx), ad::square(gy)), T(1e-12)));
}

// Mean structural similarity between two single-plane images over valid
// (unpadded) Gaussian windows.
template <typename T>
ad::Var<T> ssim_index(const ad::Var<T>& a, const ad::Var<T>& b, int win = 11,
                      double sigma = 1.5) {
    if (a.c() != 1 || b.c() != 1) throw std::invalid_argument("ssim_index: single-plane inputs");
    ad::check_same_shape(a, b, "ssim_index");
    const std::vector<T> kw = kernels::gaussian_window<T>(win, static_cast<T>(sigma));
    constexpr T C1 = T(0.01 * 0.01), C2 = T(0.03 * 0.03);
    auto mu1 = ad::conv_const_valid(a, kw, win);
    auto mu2 = ad::conv_const_valid(b, kw, win);
    auto s1 = ad::sub(ad::conv_const_valid(ad::square(a), kw, win), ad::square(mu1));
    auto s2 = ad::sub(ad::conv_const_valid(ad::square(b), kw, win), ad::square(mu2));
    auto s12 = ad::sub(ad::conv_const_valid(ad::mul(a, b), kw, win), ad::mul(mu1, mu2));
    auto num = ad::mul(ad::add_scalar(ad::scale(ad::mul(mu1, mu2), T(2)), C1),
                       ad::add_scalar(ad::scale(s12, T(2)), C2));
    auto den = ad::mul(ad::add_scalar(ad::add(ad::square(mu1), ad::square(mu2)), C1),
                       ad::add_scalar(ad::add(s1, s2), C2));
    return ad::mean_all(ad::div(num, den));
}

// Mean absolute error against the per-pixel max of the two sources.
template <typename T>
ad::Var<T> pixel_loss(const ad::Var<T>& fused, const ad::Var<T>& vis, const ad::Var<T>& ir) {
    return ad::mean_all(ad::abs(ad::sub(fused, ad::maximum(vis, ir))));
}

// Mean absolute error between the fused edge field and the stronger source
// edge field, on luma.
template <typename T>
ad::Var<T> gradient_loss(const ad::Var<T>& fused, const ad::Var<T>& vis, const ad::Var<T>& ir) {
    auto mf = grad_magnitude(luma_op(fused));
    auto mt = ad::maximum(grad_magnitude(luma_op(vis)), grad_magnitude(luma_op(ir)));
    return ad::mean_all(ad::abs(ad::sub(mf, mt)));
}

// Structural dissimilarity against both sources, on luma.
template <typename T>
ad::Var<T> ssim_loss(const ad::Var<T>& fused, const ad::Var<T>& vis, const ad::Var<T>& ir,
                     int win = 11, double sigma = 1.5) {
    auto yf = luma_op(fused);
    auto one_minus = [](const ad::Var<T>& s) { return ad::add_scalar(ad::scale(s, T(-1)), T(1)); };
    return ad::add(one_minus(ssim_index(yf, luma_op(vis), win, sigma)),
                   one_minus(ssim_index(yf, luma_op(ir), win, sigma)));
}

// Chroma should follow the visible image.
template <typename T>
ad::Var<T> color_loss(const ad::Var<T>& fused, const ad::Var<T>& vis) {
    auto cf = ad::slice_channels(ycbcr_op(fused), 1, 2);
    auto cv = ad::slice_channels(ycbcr_op(vis), 1, 2);
    return ad::mean_all(ad::abs(ad::sub(cf, cv)));
}

// Per-term multipliers; all 1 by default so total is the plain sum.
struct LossWeights {
    double pixel = 1.0, grad = 1.0, ssim = 1.0, color = 1.0;
};

template <typename T>
struct LossTerms {
    ad::Var<T> pixel, grad, ssim, color, total;  // terms stored already weighted
};

template <typename T>
LossTerms<T> fusion_loss(const ad::Var<T>& fused, const ad::Var<T>& vis, const ad::Var<T>& ir,
                         const LossWeights& w = {}) {
    LossTerms<T> t;
    t.pixel = ad::scale(pixel_loss(fused, vis, ir), static_cast<T>(w.pixel));
    t.grad = ad::scale(gradient_loss(fused, vis, ir), static_cast<T>(w.grad));
    t.ssim = ad::scale(ssim_loss(fused, vis, ir), static_cast<T>(w.ssim));
    t.color = ad::scale(color_loss(fused, vis), static_cast<T>(w.color));
    t.total = ad::add(ad::add(t.pixel, t.grad), ad::add(t.ssim, t.color));
    return t;
}

struct LossBreakdown {
    double pixel = 0, grad = 0, ssim = 0, color = 0, total = 0;
};

std::string to_json(const LossBreakdown& l);

// Non-differentiating evaluation on plain images, for logs and tests.
inline LossBreakdown total_loss(const Image& f, const Image& v, const Image& i,
                                const LossWeights& w = {}) {
    ad::NoGradGuard ng;
    auto ff = ad::Var<double>::constant(f.to_rgb().to_tensor_f64());
    auto vv = ad::Var<double>::constant(v.to_rgb().to_tensor_f64());
    auto ii = ad::Var<double>::constant(i.to_rgb().to_tensor_f64());
    auto t = fusion_loss(ff, vv, ii, w);
    return {t.pixel.scalar(), t.grad.scalar(), t.ssim.scalar(), t.color.scalar(),
            t.total.scalar()};
}

}  // namespace dreamif
