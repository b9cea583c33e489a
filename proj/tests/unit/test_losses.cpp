#include <cmath>

#include "doctest.h"
#include "dreamif/dataio.hpp"
#include "dreamif/losses.hpp"

using namespace dreamif;
namespace tad = dreamif::ad;

namespace {

Image toy_image(std::uint64_t seed) {
    RandomSource rng(seed);
    return make_toy_pair(32, rng).pair.vis;
}

}  // namespace

TEST_CASE("perfect fusion of identical sources is free") {
    const Image f = toy_image(1);
    const auto l = total_loss(f, f, f);
    CHECK_LT(l.total, 1e-6);
    CHECK(l.total == l.pixel + l.grad + l.ssim + l.color);
}

TEST_CASE("pixel loss vanishes exactly on the elementwise max") {
    const Image v = toy_image(2);
    Image i = toy_image(3);
    const Image f = elementwise_max(v, i);
    tad::NoGradGuard ng;
    auto fv = tad::Var<double>::constant(f.to_tensor_f64());
    auto vv = tad::Var<double>::constant(v.to_tensor_f64());
    auto iv = tad::Var<double>::constant(i.to_tensor_f64());
    CHECK(pixel_loss(fv, vv, iv).scalar() == 0.0);
}

TEST_CASE("pixel loss of a uniform offset equals the offset") {
    const Image v = Image::constant(16, 16, 3, 0.4);
    Image f = Image::constant(16, 16, 3, 0.5);
    tad::NoGradGuard ng;
    auto fv = tad::Var<double>::constant(f.to_tensor_f64());
    auto vv = tad::Var<double>::constant(v.to_tensor_f64());
    CHECK(pixel_loss(fv, vv, vv).scalar() == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("ssim index oracles") {
    tad::NoGradGuard ng;
    SUBCASE("self similarity is one") {
        const Image x = toy_image(4);
        auto xv = tad::Var<double>::constant(x.to_tensor_f64());
        auto y = luma_op(xv);
        CHECK(ssim_index(y, y).scalar() == doctest::Approx(1.0).epsilon(1e-8));
    }
    SUBCASE("constant images match the closed form") {
        auto a = tad::Var<double>::constant(Tensor<double>::full(1, 16, 16, 0.5));
        auto b = tad::Var<double>::constant(Tensor<double>::full(1, 16, 16, 0.6));
        // zero variances: only the luminance factor survives
        const double c1 = 1e-4;
        const double expect = (2 * 0.5 * 0.6 + c1) / (0.5 * 0.5 + 0.6 * 0.6 + c1);
        CHECK(ssim_index(a, b).scalar() == doctest::Approx(expect).epsilon(1e-8));
    }
    SUBCASE("small-window parameterization stays near one on self") {
        auto a = tad::Var<double>::constant(Tensor<double>::full(1, 8, 8, 0.3));
        CHECK(ssim_index(a, a, 5, 1.5).scalar() == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("gradient loss is symmetric in the sources") {
    const Image v = toy_image(5);
    const Image i = toy_image(6);
    const Image f = toy_image(7);
    tad::NoGradGuard ng;
    auto fv = tad::Var<double>::constant(f.to_tensor_f64());
    auto vv = tad::Var<double>::constant(v.to_tensor_f64());
    auto iv = tad::Var<double>::constant(i.to_tensor_f64());
    CHECK(gradient_loss(fv, vv, iv).scalar() ==
          doctest::Approx(gradient_loss(fv, iv, vv).scalar()).epsilon(1e-12));
}

TEST_CASE("color loss ignores luma-only changes") {
    const Image v = toy_image(8);
    Image f = v;
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x)
            for (int c = 0; c < 3; ++c) f.at(c, y, x) = std::min(1.0, f.at(c, y, x) + 0.07);
    tad::NoGradGuard ng;
    auto fv = tad::Var<double>::constant(f.to_tensor_f64());
    auto vv = tad::Var<double>::constant(v.to_tensor_f64());
    // adding the same offset to r=g=b moves Y only, up to clamping
    CHECK_LT(color_loss(fv, vv).scalar(), 5e-3);
}

TEST_CASE("weights scale their terms and the total stays the sum") {
    const Image f = toy_image(9), v = toy_image(10), i = toy_image(11);
    LossWeights w;
    w.pixel = 2.0;
    w.grad = 0.5;
    w.ssim = 0.0;
    w.color = 3.0;
    const auto unit = total_loss(f, v, i);
    const auto scaled = total_loss(f, v, i, w);
    CHECK(scaled.pixel == doctest::Approx(2.0 * unit.pixel).epsilon(1e-12));
    CHECK(scaled.grad == doctest::Approx(0.5 * unit.grad).epsilon(1e-12));
    CHECK(scaled.ssim == 0.0);
    CHECK(scaled.color == doctest::Approx(3.0 * unit.color).epsilon(1e-12));
    CHECK(scaled.total ==
          doctest::Approx(scaled.pixel + scaled.grad + scaled.color).epsilon(1e-12));
}

TEST_CASE("loss breakdown serializes every term") {
    LossBreakdown l{0.1, 0.2, 0.3, 0.4, 1.0};
    const auto text = to_json(l);
    for (const char* key : {"pixel", "grad", "ssim", "color", "total"})
        CHECK(text.find(key) != std::string::npos);
}
