#pragma once

#include "dreamif/backbone.hpp"

// Relative enhancement: at every decoder stage each modality estimates a
// per-pixel dominance map for itself; the OTHER modality's map then drives two
// parallel repair branches on this one's feature — a cross branch that pulls
// in the partner's dominant content, and a self branch conditioned on a
// learned prompt selected by where the partner dominates. Both branches end in
// zero-initialized projections, and the final merge averages the two branch
// outputs, so at initialization the whole block is exactly the identity.

namespace dreamif {

struct EnhanceConfig {
    bool use_ce = true;            // cross-enhancement branch
    bool use_se = true;            // prompt-conditioned self-enhancement branch
    bool rd_pair_softmax = false;  // couple the two dominance maps to sum to one
    int prompt_n = 5;              // prompt components per bank
    int prompt_base = 16;          // square base resolution of each component
};

// Dominance logits: one transformer block then a 1x1 squeeze to a single plane.
template <typename T>
ad::Var<T> rd_logits(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& f, int heads,
                     double ffn_expansion) {
    auto t = transformer_block(ps, p + ".tb", f, heads, ffn_expansion);
    return pconv1x1(ps, p + ".out", t, 1);
}

// f + Z(TB(reduce(cat[f, rd_other * other]))): imports content where the
// partner dominates. Z is zero-initialized, so this starts as the identity.
template <typename T>
ad::Var<T> cross_enhance(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& f,
                         const ad::Var<T>& other, const ad::Var<T>& rd_other, int heads,
                         double ffn_expansion) {
    auto gated = ad::mul_broadcast(other, rd_other);
    auto mixed = pconv1x1(ps, p + ".reduce", ad::concat_channels(f, gated), f.c());
    auto t = transformer_block(ps, p + ".tb", mixed, heads, ffn_expansion);
    return ad::add(f, pconv1x1(ps, p + ".z", t, f.c(), Init::kZeros));
}

// Soft-select one restoration prompt from a learned bank. The selector pools
// the feature where the partner dominates, so the prompt choice reflects what
// kind of repair this modality needs there.
template <typename T>
ad::Var<T> relative_prompt(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& f,
                           const ad::Var<T>& rd_other, const EnhanceConfig& ec) {
    const int c = f.c();
    auto pooled = ad::global_avg_pool(ad::mul_broadcast(f, rd_other));
    auto sw = ps.get(p + ".sel.w", ec.prompt_n, c, 1, Init::kTruncNormal);
    auto sb = ps.get(p + ".sel.b", ec.prompt_n, 1, 1, Init::kZeros);
    auto weights = ad::softmax_vec(ad::linear_vec(pooled, sw, sb));
    auto bank = ps.get(p + ".bank", ec.prompt_n * c, ec.prompt_base, ec.prompt_base,
                       Init::kTruncNormal);
    auto mixed = ad::bank_mix(weights, bank, c);
    return pconv3x3(ps, p + ".smooth", ad::bilinear_resize(mixed, f.h(), f.w()), c);
}

// f + Z(TB(reduce(cat[f, prompt]))): refines the feature conditioned on the
// selected prompt. Also exactly the identity at initialization.
template <typename T>
ad::Var<T> self_enhance(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& f,
                        const ad::Var<T>& prompt, int heads, double ffn_expansion) {
    auto mixed = pconv1x1(ps, p + ".reduce", ad::concat_channels(f, prompt), f.c());
    auto t = transformer_block(ps, p + ".tb", mixed, heads, ffn_expansion);
    return ad::add(f, pconv1x1(ps, p + ".z", t, f.c(), Init::kZeros));
}

template <typename T>
struct EnhancedPair {
    ad::Var<T> a, b;        // enhanced features, same shape as the inputs
    ad::Var<T> rd_a, rd_b;  // dominance maps, (1,H,W) in (0,1)
};

// One enhancement exchange between the two modality features at a decoder
// stage. The merge conv starts as an exact 0.5/0.5 average of the two branch
// outputs; since each branch starts as the identity, the block as a whole
// reproduces its input bit for bit at initialization.
template <typename T>
EnhancedPair<T> re_block(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& fa,
                         const ad::Var<T>& fb, int heads, double ffn_expansion,
                         const EnhanceConfig& ec) {
    ad::check_same_shape(fa, fb, "re_block");
    EnhancedPair<T> out;
    auto la = rd_logits(ps, p + ".rda", fa, heads, ffn_expansion);
    auto lb = rd_logits(ps, p + ".rdb", fb, heads, ffn_expansion);
    if (ec.rd_pair_softmax) {
        out.rd_a = ad::sigmoid(ad::sub(la, lb));
        out.rd_b = ad::sigmoid(ad::sub(lb, la));
    } else {
        out.rd_a = ad::sigmoid(la);
        out.rd_b = ad::sigmoid(lb);
    }

    auto branch = [&](const char* side, const ad::Var<T>& f, const ad::Var<T>& other,
                      const ad::Var<T>& rd_other) {
        const std::string s = p + "." + side;
        ad::Var<T> ce = ec.use_ce
                            ? cross_enhance(ps, s + ".ce", f, other, rd_other, heads, ffn_expansion)
                            : f;
        ad::Var<T> se = ec.use_se
                            ? self_enhance(ps, s + ".se", f,
                                           relative_prompt(ps, s + ".rp", f, rd_other, ec), heads,
                                           ffn_expansion)
                            : f;
        auto mw = ps.get(s + ".merge.w", f.c(), 2 * f.c(), 1, Init::kHalfIdentityPair);
        auto mb = ps.get(s + ".merge.b", f.c(), 1, 1, Init::kZeros);
        return ad::conv1x1(ad::concat_channels(ce, se), mw, mb);
    };
    out.a = branch("a", fa, fb, out.rd_b);
    out.b = branch("b", fb, fa, out.rd_a);
    return out;
}

}  // namespace dreamif
