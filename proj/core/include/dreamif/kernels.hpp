#pragma once

#include <cmath>
#include <vector>

// Shared numeric kernels: one definition serves both the double-precision
// image/metric path and the templated differentiable path.

namespace dreamif::kernels {

// Full-range YCbCr coefficients (luma weights 0.299/0.587/0.114, chroma
// scaled so the extreme saturated colors land exactly on [0,1]).
inline constexpr double kYR = 0.299, kYG = 0.587, kYB = 0.114;
inline constexpr double kCbScale = 0.5643340857787811;  // 0.5 / (1 - kYB)
inline constexpr double kCrScale = 0.7132667617689016;  // 0.5 / (1 - kYR)

// Symmetric reflection: ...cba|abc...xyz|zyx...
inline int reflect(int i, int n) {
    if (i < 0) return -i - 1;
    if (i >= n) return 2 * n - 1 - i;
    return i;
}

// 3x3 edge kernels (correlation; gx positive for increasing x) with
// symmetric-reflection padding. Output matches input shape.
template <typename T>
void sobel_plane(const T* src, int h, int w, T* gx, T* gy) {
    for (int y = 0; y < h; ++y) {
        const int ym = reflect(y - 1, h), yp = reflect(y + 1, h);
        const T* rm = src + static_cast<std::size_t>(ym) * w;
        const T* r0 = src + static_cast<std::size_t>(y) * w;
        const T* rp = src + static_cast<std::size_t>(yp) * w;
        for (int x = 0; x < w; ++x) {
            const int xm = reflect(x - 1, w), xp = reflect(x + 1, w);
            const std::size_t o = static_cast<std::size_t>(y) * w + x;
            gx[o] = (rm[xp] - rm[xm]) + T(2) * (r0[xp] - r0[xm]) + (rp[xp] - rp[xm]);
            gy[o] = (rp[xm] - rm[xm]) + T(2) * (rp[x] - rm[x]) + (rp[xp] - rm[xp]);
        }
    }
}

// Normalized 2-D gaussian taps, size x size, returned row-major.
template <typename T>
std::vector<T> gaussian_window(int size, double sigma) {
    std::vector<T> k(static_cast<std::size_t>(size) * size);
    const double c = (size - 1) / 2.0;
    double sum = 0.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double d2 = (y - c) * (y - c) + (x - c) * (x - c);
            const double v = std::exp(-d2 / (2.0 * sigma * sigma));
            k[static_cast<std::size_t>(y) * size + x] = static_cast<T>(v);
            sum += v;
        }
    for (auto& v : k) v = static_cast<T>(v / sum);
    return k;
}

}  // namespace dreamif::kernels
