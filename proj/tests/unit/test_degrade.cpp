#include <cmath>

#include "doctest.h"
#include "dreamif/degrade.hpp"
#include "dreamif/errors.hpp"

using namespace dreamif;

namespace {

// mean/std of (degraded - clean) over a constant image
struct NoiseStats {
    double mean = 0, std = 0;
};

NoiseStats residual_stats(const Image& clean, const Image& noisy) {
    double sum = 0, sq = 0;
    const std::size_t n = clean.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = noisy.data()[i] - clean.data()[i];
        sum += d;
        sq += d * d;
    }
    const double mean = sum / n;
    return {mean, std::sqrt(sq / n - mean * mean)};
}

}  // namespace

TEST_CASE("degradations are pure functions of (image, spec)") {
    const Image x = Image::constant(32, 32, 3, 0.5);
    DegradationSpec spec;
    spec.kind = DegradationKind::gaussian;
    spec.seed = 99;
    const Image a = apply(x, spec);
    const Image b = apply(x, spec);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("gaussian residual statistics at sigma 35") {
    const Image x = Image::constant(200, 200, 3, 0.5);  // 120k samples, mid-range: little clipping
    RandomSource rng(1);
    const Image y = apply_gaussian(x, 35.0, rng);
    const auto s = residual_stats(x, y);
    CHECK_LT(std::abs(s.mean), 0.002);
    CHECK(s.std == doctest::Approx(35.0 / 255.0).epsilon(0.03));
    for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK_GE(y.data()[i], 0.0);
        CHECK_LE(y.data()[i], 1.0);
    }
}

TEST_CASE("poisson keeps the mean and shrinks with intensity scale") {
    const Image x = Image::constant(200, 200, 1, 0.5);
    RandomSource rng(2);
    const Image y = apply_poisson(x, 4.0, rng);
    const auto s = residual_stats(x, y);
    CHECK_LT(std::abs(s.mean), 0.001);
    // var = x / 10^lam  ->  std = sqrt(0.5e-4)
    CHECK(s.std == doctest::Approx(std::sqrt(0.5e-4)).epsilon(0.05));
}

TEST_CASE("speckle scales noise with the signal") {
    const Image x = Image::constant(200, 200, 1, 0.5);
    RandomSource rng(3);
    const Image y = apply_speckle(x, 25.0, rng);
    const auto s = residual_stats(x, y);
    CHECK(s.std == doctest::Approx(0.5 * 25.0 / 255.0).epsilon(0.03));
}

TEST_CASE("speckle eps 0 is the identity") {
    const Image x = Image::constant(8, 8, 3, 0.25);
    RandomSource rng(4);
    const Image y = apply_speckle(x, 0.0, rng);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("triplet differs from every single stage") {
    const Image x = Image::constant(16, 16, 3, 0.5);
    DegradationSpec spec;
    spec.seed = 7;
    auto with_kind = [&](DegradationKind k) {
        DegradationSpec s = spec;
        s.kind = k;
        return apply(x, s);
    };
    const Image t = with_kind(DegradationKind::triplet);
    for (const auto k :
         {DegradationKind::gaussian, DegradationKind::poisson, DegradationKind::speckle}) {
        const Image single = with_kind(k);
        bool differs = false;
        for (std::size_t i = 0; i < t.size() && !differs; ++i)
            differs = t.data()[i] != single.data()[i];
        CHECK(differs);
    }
}

TEST_CASE("none kind is the identity") {
    const Image x = Image::constant(4, 4, 3, 0.123);
    DegradationSpec spec;  // kind = none
    const Image y = apply(x, spec);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("sample_spec draws inside the documented ranges") {
    RandomSource rng(5);
    const std::set<DegradationKind> kinds = {DegradationKind::gaussian, DegradationKind::poisson,
                                             DegradationKind::speckle, DegradationKind::triplet};
    std::set<DegradationKind> seen;
    for (int i = 0; i < 200; ++i) {
        const auto spec = sample_spec(rng, kinds);
        seen.insert(spec.kind);
        CHECK(kinds.count(spec.kind) == 1);
        CHECK(spec.sigma == 35.0);
        CHECK_GE(spec.lam, 2.0);
        CHECK_LE(spec.lam, 4.0);
        CHECK_GE(spec.eps, 2.0);
        CHECK_LE(spec.eps, 25.0);
    }
    CHECK(seen.size() == kinds.size());  // every kind shows up across 200 draws
    CHECK_THROWS_AS(sample_spec(rng, {}), std::invalid_argument);
}

TEST_CASE("degradation spec json round trip") {
    DegradationSpec spec;
    spec.kind = DegradationKind::speckle;
    spec.sigma = 12.5;
    spec.lam = 3.25;
    spec.eps = 19.0;
    spec.seed = 123456789;
    const auto back = degradation_spec_from_json(to_json(spec));
    CHECK(back.kind == spec.kind);
    CHECK(back.sigma == spec.sigma);
    CHECK(back.lam == spec.lam);
    CHECK(back.eps == spec.eps);
    CHECK(back.seed == spec.seed);
    CHECK_THROWS_AS(degradation_spec_from_json("not json"), FormatError);
    CHECK_THROWS_AS(degradation_spec_from_json("{\"kind\":\"sepia\"}"), std::invalid_argument);
}
