#include <cmath>

#include "doctest.h"
#include "dreamif/dataio.hpp"
#include "dreamif/degrade.hpp"
#include "dreamif/metrics.hpp"

using namespace dreamif;

namespace {

Image ramp_image(int size, double slope) {
    Image img(size, size, 1);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) img.at(0, y, x) = slope * x;
    return img.to_rgb();
}

Image edged_image(int size) {
    Image img(size, size, 1);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) img.at(0, y, x) = x < size / 2 ? 0.2 : 0.8;
    return img.to_rgb();
}

}  // namespace

TEST_CASE("edge intensity and average gradient vanish on constants") {
    const Image flat = Image::constant(32, 32, 3, 0.6);
    CHECK(edge_intensity(flat) == 0.0);
    CHECK(average_gradient(flat) == 0.0);
}

TEST_CASE("average gradient of a ramp is c over sqrt 2") {
    // forward differences on 0..255-scale luma: dx = 255*slope, dy = 0
    const double slope = 0.002;
    const Image img = ramp_image(32, slope);
    const double c = 255.0 * slope;
    CHECK(average_gradient(img) == doctest::Approx(c / std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("psnr oracles") {
    const Image a = Image::constant(16, 16, 3, 0.5);
    Image b = Image::constant(16, 16, 3, 0.6);  // uniform 0.1 offset
    CHECK(fusion_psnr(a, a, a) == 100.0);
    CHECK(fusion_psnr(b, a, a) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("qabf oracles") {
    RandomSource rng(31);
    const Image f = make_toy_pair(64, rng).pair.vis;
    CHECK_GE(qabf(f, f, f), 0.99);
    const Image flat = Image::constant(64, 64, 3, 0.5);
    const Image edges = edged_image(64);
    CHECK_LE(qabf(flat, edges, edges), 0.01);
}

TEST_CASE("viff oracles") {
    RandomSource rng(37);
    const Image f = make_toy_pair(64, rng).pair.vis;
    CHECK(viff(f, f, f) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("noise strictly lowers qabf and viff") {
    RandomSource rng(43);
    const auto pair = make_toy_pair(64, rng).pair;
    const Image clean = elementwise_max(pair.vis, pair.ir);  // a decent fused stand-in
    DegradationSpec spec;
    spec.kind = DegradationKind::gaussian;
    spec.sigma = 35.0;
    spec.seed = 17;
    const Image noisy = apply(clean, spec);
    CHECK_LT(qabf(noisy, pair.vis, pair.ir), qabf(clean, pair.vis, pair.ir));
    CHECK_LT(viff(noisy, pair.vis, pair.ir), viff(clean, pair.vis, pair.ir));
}

TEST_CASE("evaluate_pair bundles the five metrics") {
    RandomSource rng(47);
    const auto pair = make_toy_pair(64, rng).pair;
    const Image fused = elementwise_max(pair.vis, pair.ir);
    const auto r = evaluate_pair(fused, pair.vis, pair.ir);
    CHECK(r.ei == doctest::Approx(edge_intensity(fused)));
    CHECK(r.ag == doctest::Approx(average_gradient(fused)));
    CHECK(r.psnr == doctest::Approx(fusion_psnr(fused, pair.vis, pair.ir)));
    CHECK(r.qabf == doctest::Approx(qabf(fused, pair.vis, pair.ir)));
    CHECK(r.viff == doctest::Approx(viff(fused, pair.vis, pair.ir)));
    const auto text = to_json(r);
    for (const char* key : {"ei", "ag", "psnr", "qabf", "viff"})
        CHECK(text.find(key) != std::string::npos);
}

TEST_CASE("metrics are scale-sane on shared edges") {
    // fused carrying the sources' own edges should preserve more than a blur
    const Image edges = edged_image(64);
    Image blurred(64, 64, 1);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            double acc = 0;
            int n = 0;
            for (int dx = -4; dx <= 4; ++dx) {
                const int xx = std::clamp(x + dx, 0, 63);
                acc += edges.at(0, y, xx);
                ++n;
            }
            blurred.at(0, y, x) = acc / n;
        }
    const Image blurred3 = blurred.to_rgb();
    CHECK_GT(qabf(edges, edges, edges), qabf(blurred3, edges, edges));
}
