#pragma once

#include <algorithm>
#include <cstddef>
#include <new>
#include <stdexcept>
#include <vector>

namespace dreamif {

// 64-byte-aligned storage. Vectorized kernels split loops into peel/body/tail
// around alignment boundaries; pinning every buffer to the widest boundary
// makes that split a function of the shape alone, so results never depend on
// where the allocator happened to place a buffer.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{alignment}));
    }
    void deallocate(T* p, std::size_t n) noexcept {
        ::operator delete(p, n * sizeof(T), std::align_val_t{alignment});
    }
    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

template <typename T>
using AlignedVec = std::vector<T, AlignedAllocator<T>>;

// Dense planar feature array, channels x height x width, row-major within a
// plane. The scalar type is a template parameter because the network runs in
// float while gradient checking instantiates the identical code in double.
template <typename T>
struct Tensor {
    int c = 0, h = 0, w = 0;
    AlignedVec<T> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_) {}

    static Tensor full(int c, int h, int w, T value) {
        Tensor t(c, h, w);
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }

    std::size_t size() const { return v.size(); }
    int plane() const { return h * w; }

    T& operator()(int ci, int y, int x) { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
    T operator()(int ci, int y, int x) const { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }

    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(c, h, w);
        for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

// Space-to-depth: every r x r spatial tile becomes r^2 consecutive channels.
// Output channel c*r^2 + dy*r + dx holds input samples (c, y*r+dy, x*r+dx).
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int r) {
    if (r <= 0 || x.h % r != 0 || x.w % r != 0)
        throw std::invalid_argument("pixel_unshuffle: spatial dims must be divisible by r");
    Tensor<T> out(x.c * r * r, x.h / r, x.w / r);
    for (int c = 0; c < x.c; ++c)
        for (int dy = 0; dy < r; ++dy)
            for (int dx = 0; dx < r; ++dx) {
                const int oc = (c * r + dy) * r + dx;
                for (int y = 0; y < out.h; ++y)
                    for (int xx = 0; xx < out.w; ++xx)
                        out(oc, y, xx) = x(c, y * r + dy, xx * r + dx);
            }
    return out;
}

// Depth-to-space, exact inverse of pixel_unshuffle with the same layout.
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r) {
    if (r <= 0 || x.c % (r * r) != 0)
        throw std::invalid_argument("pixel_shuffle: channels must be divisible by r^2");
    Tensor<T> out(x.c / (r * r), x.h * r, x.w * r);
    for (int c = 0; c < out.c; ++c)
        for (int dy = 0; dy < r; ++dy)
            for (int dx = 0; dx < r; ++dx) {
                const int ic = (c * r + dy) * r + dx;
                for (int y = 0; y < x.h; ++y)
                    for (int xx = 0; xx < x.w; ++xx)
                        out(c, y * r + dy, xx * r + dx) = x(ic, y, xx);
            }
    return out;
}

}  // namespace dreamif
