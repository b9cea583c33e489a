#pragma once

#include <array>
#include <string>

#include "dreamif/nn_ops.hpp"
#include "dreamif/params.hpp"

// Channel-attention transformer backbone: a 4-level U-shaped encoder/decoder.
// Spatial size halves and channel count doubles per level. All functions are
// stateless; parameters live in the store under hierarchical names, so calling
// a function is also what registers its weights.

namespace dreamif {

struct BackboneConfig {
    int base_dim = 48;  // channels at the full-resolution level
    std::array<int, 4> level_blocks{2, 3, 3, 4};
    std::array<int, 4> heads{1, 2, 4, 8};
    double ffn_expansion = 2.66;
    int fuse_blocks = 3;
};

// --- parameterized layer helpers ---------------------------------------------

template <typename T>
ad::Var<T> pconv1x1(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& x, int oc,
                    Init winit = Init::kTruncNormal) {
    auto w = ps.get(p + ".w", oc, x.c(), 1, winit);
    auto b = ps.get(p + ".b", oc, 1, 1, Init::kZeros);
    return ad::conv1x1(x, w, b);
}

template <typename T>
ad::Var<T> pconv3x3(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& x, int oc,
                    Init winit = Init::kTruncNormal) {
    auto w = ps.get(p + ".w", oc, x.c(), 9, winit);
    auto b = ps.get(p + ".b", oc, 1, 1, Init::kZeros);
    return ad::conv3x3(x, w, b);
}

template <typename T>
ad::Var<T> pdwconv3x3(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& x) {
    auto w = ps.get(p + ".w", x.c(), 1, 9, Init::kTruncNormal);
    auto b = ps.get(p + ".b", x.c(), 1, 1, Init::kZeros);
    return ad::dwconv3x3(x, w, b);
}

template <typename T>
ad::Var<T> pln(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& x) {
    auto g = ps.get(p + ".g", x.c(), 1, 1, Init::kOnes);
    auto b = ps.get(p + ".b", x.c(), 1, 1, Init::kZeros);
    return ad::layer_norm_channels(x, g, b);
}

// --- transformer block --------------------------------------------------------
// x + proj(channel_attention(dwconv(qkv(norm(x))))) followed by a gated
// feed-forward with the same residual pattern.

template <typename T>
ad::Var<T> transformer_block(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& x,
                             int heads, double ffn_expansion) {
    const int c = x.c();
    auto h1 = pln(ps, p + ".ln1", x);
    auto qkv = pconv1x1(ps, p + ".qkv", h1, 3 * c);
    qkv = pdwconv3x3(ps, p + ".qkvd", qkv);
    auto q = ad::slice_channels(qkv, 0, c);
    auto k = ad::slice_channels(qkv, c, c);
    auto v = ad::slice_channels(qkv, 2 * c, c);
    auto temp = ps.get(p + ".temp", heads, 1, 1, Init::kOnes);
    auto y = ad::add(x, pconv1x1(ps, p + ".proj", ad::channel_attention(q, k, v, temp, heads), c));

    const int e = static_cast<int>(c * ffn_expansion);
    auto h2 = pln(ps, p + ".ln2", y);
    auto ff = pconv1x1(ps, p + ".ff1", h2, 2 * e);
    ff = pdwconv3x3(ps, p + ".ffd", ff);
    auto gated = ad::mul(ad::gelu(ad::slice_channels(ff, 0, e)), ad::slice_channels(ff, e, e));
    return ad::add(y, pconv1x1(ps, p + ".ff2", gated, c));
}

template <typename T>
ad::Var<T> run_blocks(ParameterStore<T>& ps, const std::string& p, ad::Var<T> x, int nblocks,
                      int heads, double ffn_expansion) {
    for (int i = 0; i < nblocks; ++i)
        x = transformer_block(ps, p + ".b" + std::to_string(i), x, heads, ffn_expansion);
    return x;
}

// --- resolution changes --------------------------------------------------------
// Down: halve channels then fold 2x2 neighborhoods into channels (net 2x
// channels at half resolution). Up is the mirror image.

template <typename T>
ad::Var<T> downsample(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& x) {
    if (x.c() % 2 != 0) throw std::invalid_argument("downsample: odd channel count");
    return ad::pixel_unshuffle_op(pconv1x1(ps, p, x, x.c() / 2), 2);
}

template <typename T>
ad::Var<T> upsample(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& x) {
    return ad::pixel_shuffle_op(pconv1x1(ps, p, x, x.c() * 2), 2);
}

// --- encoder -------------------------------------------------------------------

template <typename T>
struct EncoderFeatures {
    std::array<ad::Var<T>, 4> level;  // [0] full res (C) ... [3] deepest (8C)
};

template <typename T>
EncoderFeatures<T> encoder_forward(ParameterStore<T>& ps, const std::string& p,
                                   const ad::Var<T>& x, const BackboneConfig& cfg) {
    if (x.h() % 8 != 0 || x.w() % 8 != 0)
        throw std::invalid_argument("encoder_forward: spatial dims must be multiples of 8");
    EncoderFeatures<T> out;
    auto f = pconv3x3(ps, p + ".embed", x, cfg.base_dim);
    out.level[0] = run_blocks(ps, p + ".lv1", f, cfg.level_blocks[0], cfg.heads[0],
                              cfg.ffn_expansion);
    f = downsample(ps, p + ".down1", out.level[0]);
    out.level[1] = run_blocks(ps, p + ".lv2", f, cfg.level_blocks[1], cfg.heads[1],
                              cfg.ffn_expansion);
    f = downsample(ps, p + ".down2", out.level[1]);
    out.level[2] = run_blocks(ps, p + ".lv3", f, cfg.level_blocks[2], cfg.heads[2],
                              cfg.ffn_expansion);
    f = downsample(ps, p + ".down3", out.level[2]);
    out.level[3] = run_blocks(ps, p + ".lv4", f, cfg.level_blocks[3], cfg.heads[3],
                              cfg.ffn_expansion);
    return out;
}

// --- decoder stages --------------------------------------------------------------
// Stage 1 (deepest) refines the bottleneck in place; stages 2..4 lift the
// running feature up one level, merge the encoder skip, and refine.

template <typename T>
ad::Var<T> decoder_stage_deepest(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& x,
                                 const BackboneConfig& cfg) {
    return run_blocks(ps, p, x, cfg.level_blocks[3], cfg.heads[3], cfg.ffn_expansion);
}

// below: feature one level deeper (2*skip channels); skip: encoder feature at
// the target level. Output has skip.c() channels at skip resolution.
template <typename T>
ad::Var<T> decoder_stage(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& below,
                         const ad::Var<T>& skip, int nblocks, int heads, double ffn_expansion) {
    auto up = upsample(ps, p + ".up", below);
    auto merged = pconv1x1(ps, p + ".reduce", ad::concat_channels(up, skip), skip.c());
    return run_blocks(ps, p, merged, nblocks, heads, ffn_expansion);
}

// --- fusion head ------------------------------------------------------------------
// Concatenate the two restored features, refine jointly, and squash a 3x3
// projection to an RGB image in (0,1).

template <typename T>
ad::Var<T> fuse_block(ParameterStore<T>& ps, const std::string& p, const ad::Var<T>& a,
                      const ad::Var<T>& b, const BackboneConfig& cfg) {
    ad::check_same_shape(a, b, "fuse_block");
    auto f = run_blocks(ps, p + ".mix", ad::concat_channels(a, b), cfg.fuse_blocks,
                        cfg.heads[0], cfg.ffn_expansion);
    return ad::sigmoid(pconv3x3(ps, p + ".out", f, 3));
}

}  // namespace dreamif
