#pragma once

#include <vector>

#include "dreamif/tensor.hpp"

namespace dreamif {

// Planar image, values in [0,1], 1 or 3 channels. Double storage: metric and
// loss contracts are specified to tolerances tighter than float resolution.
class Image {
  public:
    Image() = default;
    Image(int height, int width, int channels);

    static Image constant(int height, int width, int channels, double value);

    int height() const { return h_; }
    int width() const { return w_; }
    int channels() const { return c_; }
    bool empty() const { return data_.empty(); }

    double& at(int c, int y, int x) { return data_[(static_cast<std::size_t>(c) * h_ + y) * w_ + x]; }
    double at(int c, int y, int x) const { return data_[(static_cast<std::size_t>(c) * h_ + y) * w_ + x]; }

    double* plane(int c) { return data_.data() + static_cast<std::size_t>(c) * h_ * w_; }
    const double* plane(int c) const { return data_.data() + static_cast<std::size_t>(c) * h_ * w_; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::size_t size() const { return data_.size(); }

    void clamp01();
    bool finite_in_range() const;  // every sample finite and inside [0,1]

    // Single-channel images widen by plane replication; 3-channel is a no-op.
    Image to_rgb() const;

    Tensor<float> to_tensor_f32() const;
    Tensor<double> to_tensor_f64() const;
    static Image from_tensor(const Tensor<float>& t, bool clamp = true);
    static Image from_tensor(const Tensor<double>& t, bool clamp = true);

  private:
    int h_ = 0, w_ = 0, c_ = 0;
    std::vector<double> data_;
};

struct GradientField {
    int height = 0, width = 0;
    std::vector<double> gx, gy;
};

// Full-range YCbCr (Y in [0,1], chroma centered at 0.5). The inverse is the
// algebraic inverse of the forward matrix, so round trips are exact to
// floating-point noise. Inputs must be 3-channel.
Image rgb_to_ycbcr(const Image& rgb);
Image ycbcr_to_rgb(const Image& ycbcr);

// Luma plane of an RGB image (same weights as rgb_to_ycbcr row 0).
// 1-channel input is returned as-is.
std::vector<double> luma(const Image& img);

// 3x3 edge kernels with symmetric-reflection padding: output matches the
// input shape and a constant input produces identically zero fields. A
// horizontal ramp of slope c yields gx == 8c away from the borders.
void sobel_raw(const double* src, int h, int w, double* gx, double* gy);
GradientField sobel(const std::vector<double>& plane, int h, int w);

Image elementwise_max(const Image& a, const Image& b);

}  // namespace dreamif
