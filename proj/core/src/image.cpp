#include "dreamif/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dreamif/kernels.hpp"

namespace dreamif {

Image::Image(int height, int width, int channels) : h_(height), w_(width), c_(channels) {
    if (height <= 0 || width <= 0 || (channels != 1 && channels != 3))
        throw std::invalid_argument("Image: dims must be positive and channels 1 or 3");
    data_.assign(static_cast<std::size_t>(h_) * w_ * c_, 0.0);
}

Image Image::constant(int height, int width, int channels, double value) {
    if (value < 0.0 || value > 1.0) throw std::invalid_argument("Image::constant: value outside [0,1]");
    Image img(height, width, channels);
    std::fill(img.data_.begin(), img.data_.end(), value);
    return img;
}

void Image::clamp01() {
    for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

bool Image::finite_in_range() const {
    for (const double v : data_)
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) return false;
    return true;
}

Image Image::to_rgb() const {
    if (c_ == 3) return *this;
    Image out(h_, w_, 3);
    for (int c = 0; c < 3; ++c)
        std::copy(plane(0), plane(0) + static_cast<std::size_t>(h_) * w_, out.plane(c));
    return out;
}

Tensor<float> Image::to_tensor_f32() const {
    Tensor<float> t(c_, h_, w_);
    for (std::size_t i = 0; i < data_.size(); ++i) t.v[i] = static_cast<float>(data_[i]);
    return t;
}

Tensor<double> Image::to_tensor_f64() const {
    Tensor<double> t(c_, h_, w_);
    std::copy(data_.begin(), data_.end(), t.v.begin());
    return t;
}

template <typename T>
static Image image_from_tensor(const Tensor<T>& t, bool clamp) {
    Image img(t.h, t.w, t.c);
    for (std::size_t i = 0; i < t.size(); ++i) {
        double v = static_cast<double>(t.v[i]);
        if (clamp) v = std::clamp(v, 0.0, 1.0);
        img.data()[i] = v;
    }
    return img;
}

Image Image::from_tensor(const Tensor<float>& t, bool clamp) { return image_from_tensor(t, clamp); }
Image Image::from_tensor(const Tensor<double>& t, bool clamp) { return image_from_tensor(t, clamp); }

// ---------------------------------------------------------------------------
// Color.

using kernels::kYR;
using kernels::kYG;
using kernels::kYB;
using kernels::kCbScale;
using kernels::kCrScale;

Image rgb_to_ycbcr(const Image& rgb) {
    if (rgb.channels() != 3) throw std::invalid_argument("rgb_to_ycbcr: need 3 channels");
    Image out(rgb.height(), rgb.width(), 3);
    const std::size_t n = static_cast<std::size_t>(rgb.height()) * rgb.width();
    const double *r = rgb.plane(0), *g = rgb.plane(1), *b = rgb.plane(2);
    double *py = out.plane(0), *pcb = out.plane(1), *pcr = out.plane(2);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = kYR * r[i] + kYG * g[i] + kYB * b[i];
        py[i] = std::clamp(y, 0.0, 1.0);
        pcb[i] = std::clamp(0.5 + (b[i] - y) * kCbScale, 0.0, 1.0);
        pcr[i] = std::clamp(0.5 + (r[i] - y) * kCrScale, 0.0, 1.0);
    }
    return out;
}

Image ycbcr_to_rgb(const Image& ycbcr) {
    if (ycbcr.channels() != 3) throw std::invalid_argument("ycbcr_to_rgb: need 3 channels");
    Image out(ycbcr.height(), ycbcr.width(), 3);
    const std::size_t n = static_cast<std::size_t>(ycbcr.height()) * ycbcr.width();
    const double *py = ycbcr.plane(0), *pcb = ycbcr.plane(1), *pcr = ycbcr.plane(2);
    double *r = out.plane(0), *g = out.plane(1), *b = out.plane(2);
    for (std::size_t i = 0; i < n; ++i) {
        const double rr = py[i] + (pcr[i] - 0.5) / kCrScale;
        const double bb = py[i] + (pcb[i] - 0.5) / kCbScale;
        const double gg = (py[i] - kYR * rr - kYB * bb) / kYG;
        r[i] = std::clamp(rr, 0.0, 1.0);
        g[i] = std::clamp(gg, 0.0, 1.0);
        b[i] = std::clamp(bb, 0.0, 1.0);
    }
    return out;
}

std::vector<double> luma(const Image& img) {
    const std::size_t n = static_cast<std::size_t>(img.height()) * img.width();
    std::vector<double> y(n);
    if (img.channels() == 1) {
        std::copy(img.plane(0), img.plane(0) + n, y.begin());
    } else {
        const double *r = img.plane(0), *g = img.plane(1), *b = img.plane(2);
        for (std::size_t i = 0; i < n; ++i) y[i] = kYR * r[i] + kYG * g[i] + kYB * b[i];
    }
    return y;
}

// ---------------------------------------------------------------------------
// Edge kernels.

void sobel_raw(const double* src, int h, int w, double* gx, double* gy) {
    kernels::sobel_plane(src, h, w, gx, gy);
}

GradientField sobel(const std::vector<double>& plane, int h, int w) {
    if (static_cast<std::size_t>(h) * w != plane.size())
        throw std::invalid_argument("sobel: plane size does not match dims");
    GradientField f;
    f.height = h;
    f.width = w;
    f.gx.resize(plane.size());
    f.gy.resize(plane.size());
    sobel_raw(plane.data(), h, w, f.gx.data(), f.gy.data());
    return f;
}

Image elementwise_max(const Image& a, const Image& b) {
    if (a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels())
        throw std::invalid_argument("elementwise_max: shape mismatch");
    Image out(a.height(), a.width(), a.channels());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = std::max(a.data()[i], b.data()[i]);
    return out;
}

}  // namespace dreamif
