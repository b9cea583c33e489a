#include "dreamif/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dreamif {

std::string to_string(DegradationKind kind) {
    switch (kind) {
        case DegradationKind::none: return "none";
        case DegradationKind::gaussian: return "gaussian";
        case DegradationKind::poisson: return "poisson";
        case DegradationKind::speckle: return "speckle";
        case DegradationKind::triplet: return "triplet";
    }
    throw std::invalid_argument("to_string: bad DegradationKind");
}

DegradationKind degradation_kind_from_string(const std::string& name) {
    if (name == "none") return DegradationKind::none;
    if (name == "gaussian") return DegradationKind::gaussian;
    if (name == "poisson") return DegradationKind::poisson;
    if (name == "speckle") return DegradationKind::speckle;
    if (name == "triplet") return DegradationKind::triplet;
    throw std::invalid_argument("unknown degradation kind: " + name);
}

Image apply_gaussian(const Image& x, double sigma, RandomSource& rng) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("apply_gaussian: sigma must be finite and >= 0");
    Image y = x;
    const double s = sigma / 255.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        y.data()[i] = std::clamp(y.data()[i] + s * rng.normal(), 0.0, 1.0);
    return y;
}

Image apply_poisson(const Image& x, double lam, RandomSource& rng) {
    if (!(lam >= 2.0 && lam <= 4.0)) throw std::invalid_argument("apply_poisson: lam outside [2,4]");
    Image y = x;
    const double scale = std::pow(10.0, lam);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double n = static_cast<double>(rng.poisson(y.data()[i] * scale));
        y.data()[i] = std::clamp(n / scale, 0.0, 1.0);
    }
    return y;
}

Image apply_speckle(const Image& x, double eps, RandomSource& rng) {
    if (eps != 0.0 && !(eps >= 2.0 && eps <= 25.0))
        throw std::invalid_argument("apply_speckle: eps outside [2,25] (0 allowed as identity)");
    Image y = x;
    const double s = eps / 255.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        y.data()[i] = std::clamp(y.data()[i] * (1.0 + s * rng.normal()), 0.0, 1.0);
    return y;
}

DegradationSpec sample_spec(RandomSource& rng, const std::set<DegradationKind>& kinds) {
    if (kinds.empty()) throw std::invalid_argument("sample_spec: empty kind set");
    DegradationSpec spec;
    // Fixed draw count per call regardless of kind, so downstream streams
    // never shift when the kind set changes.
    const std::uint64_t pick = rng.uniform_index(kinds.size());
    spec.sigma = 35.0;
    spec.lam = rng.uniform(2.0, 4.0);
    spec.eps = rng.uniform(2.0, 25.0);
    spec.seed = rng.fork_seed();
    auto it = kinds.begin();
    std::advance(it, static_cast<long>(pick));
    spec.kind = *it;
    return spec;
}

Image apply(const Image& x, const DegradationSpec& spec) {
    RandomSource rng(spec.seed);
    switch (spec.kind) {
        case DegradationKind::none: return x;
        case DegradationKind::gaussian: return apply_gaussian(x, spec.sigma, rng);
        case DegradationKind::poisson: return apply_poisson(x, spec.lam, rng);
        case DegradationKind::speckle: return apply_speckle(x, spec.eps, rng);
        case DegradationKind::triplet: {
            Image y = apply_gaussian(x, spec.sigma, rng);
            y = apply_poisson(y, spec.lam, rng);
            return apply_speckle(y, spec.eps, rng);
        }
    }
    throw std::invalid_argument("apply: bad DegradationKind");
}

}  // namespace dreamif
