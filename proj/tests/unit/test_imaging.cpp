#include <cmath>

#include "doctest.h"
#include "dreamif/image.hpp"
#include "dreamif/kernels.hpp"
#include "dreamif/random.hpp"

using namespace dreamif;

TEST_CASE("ycbcr: white maps to (1, 0.5, 0.5)") {
    const Image white = Image::constant(2, 2, 3, 1.0);
    const Image y = rgb_to_ycbcr(white);
    CHECK(y.at(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(y.at(1, 0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(y.at(2, 0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ycbcr: any gray has neutral chroma") {
    for (const double g : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const Image img = Image::constant(1, 1, 3, g);
        const Image y = rgb_to_ycbcr(img);
        CHECK(y.at(0, 0, 0) == doctest::Approx(g).epsilon(1e-12));
        CHECK_LT(std::abs(y.at(1, 0, 0) - 0.5), 1e-12);
        CHECK_LT(std::abs(y.at(2, 0, 0) - 0.5), 1e-12);
    }
}

TEST_CASE("ycbcr round trip within 1e-6") {
    RandomSource rng(41);
    Image img(8, 8, 3);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) img.at(c, y, x) = rng.uniform();
    const Image back = ycbcr_to_rgb(rgb_to_ycbcr(img));
    double worst = 0;
    for (std::size_t i = 0; i < img.size(); ++i)
        worst = std::max(worst, std::abs(img.data()[i] - back.data()[i]));
    CHECK_LT(worst, 1e-6);
}

TEST_CASE("luma weights match the matrix row") {
    Image img(1, 1, 3);
    img.at(0, 0, 0) = 1.0;
    img.at(1, 0, 0) = 0.0;
    img.at(2, 0, 0) = 0.0;
    CHECK(luma(img)[0] == doctest::Approx(0.299).epsilon(1e-12));
}

TEST_CASE("sobel: constants give exactly zero fields") {
    const Image img = Image::constant(6, 7, 1, 0.42);
    const auto g = sobel(luma(img.to_rgb()), 6, 7);
    for (const double v : g.gx) CHECK(v == 0.0);
    for (const double v : g.gy) CHECK(v == 0.0);
}

TEST_CASE("sobel: horizontal ramp gives gx = 8c in the interior") {
    const double c = 0.03;
    Image img(6, 8, 1);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 8; ++x) img.at(0, y, x) = c * x;
    std::vector<double> plane(img.plane(0), img.plane(0) + 48);
    const auto g = sobel(plane, 6, 8);
    for (int y = 1; y < 5; ++y)
        for (int x = 1; x < 7; ++x) {
            CHECK(g.gx[static_cast<std::size_t>(y) * 8 + x] ==
                  doctest::Approx(8.0 * c).epsilon(1e-12));
            CHECK_LT(std::abs(g.gy[static_cast<std::size_t>(y) * 8 + x]), 1e-15);
        }
}

TEST_CASE("elementwise max picks the brighter source per channel") {
    Image a = Image::constant(2, 2, 3, 0.3);
    Image b = Image::constant(2, 2, 3, 0.7);
    a.at(1, 0, 0) = 0.9;
    const Image m = elementwise_max(a, b);
    CHECK(m.at(0, 0, 0) == 0.7);
    CHECK(m.at(1, 0, 0) == 0.9);
}

TEST_CASE("gaussian window is normalized and symmetric") {
    const auto w = kernels::gaussian_window<double>(11, 1.5);
    REQUIRE(w.size() == 121);
    double sum = 0;
    for (const double v : w) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (int i = 0; i < 121; ++i) CHECK(w[i] == doctest::Approx(w[120 - i]).epsilon(1e-12));
}

TEST_CASE("image/tensor conversions clamp only when asked") {
    Tensor<float> t(1, 1, 2);
    t.v = {1.5f, -0.25f};
    const Image clamped = Image::from_tensor(t);
    CHECK(clamped.at(0, 0, 0) == 1.0);
    CHECK(clamped.at(0, 0, 1) == 0.0);
    const Image raw = Image::from_tensor(t, false);
    CHECK(raw.at(0, 0, 0) == doctest::Approx(1.5));
}
