#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "dreamif/autodiff.hpp"
#include "dreamif/random.hpp"

namespace dreamif {

// Initialization recipes for named parameters.
enum class Init {
    kZeros,
    kOnes,
    kTruncNormal,       // N(0, 0.02), resampled beyond two sigmas
    kHalfIdentityPair,  // (C, 2C, 1) mixing conv: out = 0.5*a + 0.5*b exactly
};

template <typename T>
void fill_init(Tensor<T>& t, Init init, RandomSource& rng) {
    switch (init) {
        case Init::kZeros:
            std::fill(t.v.begin(), t.v.end(), T(0));
            break;
        case Init::kOnes:
            std::fill(t.v.begin(), t.v.end(), T(1));
            break;
        case Init::kTruncNormal:
            for (auto& v : t.v) {
                double z = rng.normal();
                while (std::abs(z) > 2.0) z = rng.normal();
                v = static_cast<T>(z * 0.02);
            }
            break;
        case Init::kHalfIdentityPair: {
            if (t.h != 2 * t.c || t.w != 1)
                throw std::invalid_argument("fill_init: pair-identity weight must be (C,2C,1)");
            std::fill(t.v.begin(), t.v.end(), T(0));
            for (int o = 0; o < t.c; ++o) {
                t.v[static_cast<std::size_t>(o) * t.h + o] = T(0.5);
                t.v[static_cast<std::size_t>(o) * t.h + t.c + o] = T(0.5);
            }
            break;
        }
    }
}

// Name-keyed bag of trainable leaves. A parameter is created the first time a
// name is requested and simply returned afterwards, so forward code doubles as
// the registration pass. Seeding is a pure function of (name, seed): the same
// name always gets the same initial values no matter in which order modules
// touch the store.
template <typename T>
class ParameterStore {
  public:
    explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}

    ad::Var<T> get(const std::string& name, int c, int h, int w, Init init) {
        auto it = params_.find(name);
        if (it != params_.end()) {
            const auto& val = it->second.value();
            if (val.c != c || val.h != h || val.w != w)
                throw std::invalid_argument("ParameterStore: shape conflict for " + name);
            return it->second;
        }
        Tensor<T> t(c, h, w);
        RandomSource rng(fnv1a64(name) ^ (0x9E3779B97F4A7C15ull * (seed_ + 1)));
        fill_init(t, init, rng);
        auto var = ad::Var<T>::leaf(std::move(t), true);
        params_.emplace(name, var);
        return var;
    }

    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    ad::Var<T>& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw std::invalid_argument("ParameterStore: unknown parameter " + name);
        return it->second;
    }

    std::size_t count() const { return params_.size(); }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& [k, v] : params_) n += v.value().size();
        return n;
    }

    void clear_grads() {
        for (auto& [k, v] : params_) v.clear_grad();
    }

    std::uint64_t seed() const { return seed_; }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

  private:
    std::map<std::string, ad::Var<T>> params_;  // ordered: iteration is canonical
    std::uint64_t seed_;
};

}  // namespace dreamif
