#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "dreamif/image.hpp"
#include "dreamif/random.hpp"

namespace dreamif {

enum class DegradationKind { none, gaussian, poisson, speckle, triplet };

std::string to_string(DegradationKind kind);
DegradationKind degradation_kind_from_string(const std::string& name);

// Noise parameters live on the 0-255 intensity scale even though images are
// stored in [0,1]; the ops divide by 255 internally. `seed` makes apply() a
// pure function of (image, spec).
struct DegradationSpec {
    DegradationKind kind = DegradationKind::none;
    double sigma = 35.0;  // additive noise std, 0-255 scale
    double lam = 3.0;     // photon-count exponent, intensity scale 10^lam
    double eps = 10.0;    // multiplicative noise std, 0-255 scale
    std::uint64_t seed = 0;
};

std::string to_json(const DegradationSpec& spec);
DegradationSpec degradation_spec_from_json(const std::string& text);

// y = clamp(x + n), n ~ N(0, (sigma/255)^2), i.i.d. per sample.
Image apply_gaussian(const Image& x, double sigma, RandomSource& rng);

// y = clamp(Poisson(x * 10^lam) / 10^lam). lam in [2,4].
Image apply_poisson(const Image& x, double lam, RandomSource& rng);

// y = clamp(x * (1 + n)), n ~ N(0, (eps/255)^2). eps in [2,25]; eps == 0 is
// accepted as an explicit identity for debugging / limit tests.
Image apply_speckle(const Image& x, double eps, RandomSource& rng);

// Draws a spec with uniformly chosen kind, sigma fixed at 35, lam ~ U[2,4],
// eps ~ U[2,25] and a child seed from rng. `kinds` must be non-empty.
DegradationSpec sample_spec(RandomSource& rng, const std::set<DegradationKind>& kinds);

// Deterministic dispatcher; triplet applies gaussian, then poisson, then
// speckle with a single stream seeded from spec.seed.
Image apply(const Image& x, const DegradationSpec& spec);

}  // namespace dreamif
