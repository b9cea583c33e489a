#pragma once

#include <cstdint>

#include "dreamif/enhance.hpp"

// Paired restoration-and-fusion model. Each modality runs through its own
// encoder/decoder; after every decoder stage the two features exchange
// information through a relative-enhancement block, and the final features are
// merged by the fusion head into one RGB image.

namespace dreamif {

struct ModelConfig {
    BackboneConfig backbone;
    EnhanceConfig enhance;
    std::uint64_t seed = 0;

    // Small configuration for tests and smoke training runs.
    static ModelConfig toy() {
        ModelConfig c;
        c.backbone.base_dim = 16;
        c.backbone.level_blocks = {1, 1, 1, 2};
        c.backbone.heads = {1, 2, 4, 8};
        c.enhance.prompt_base = 8;
        return c;
    }
    // Full-size configuration.
    static ModelConfig full() { return ModelConfig{}; }
};

std::string to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

template <typename T>
struct ForwardResult {
    ad::Var<T> fused;                  // (3,H,W), values in (0,1)
    std::array<ad::Var<T>, 4> rd_vis;  // dominance maps, [0] deepest .. [3] full res
    std::array<ad::Var<T>, 4> rd_ir;
};

template <typename T>
class Model {
  public:
    explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)), ps_(cfg_.seed) {
        // Materialize every parameter up front with a throwaway pass so that
        // checkpoints and optimizer state always see the complete set.
        ad::NoGradGuard ng;
        auto z = ad::Var<T>::constant(Tensor<T>(3, 8, 8));
        (void)forward(z, z);
    }

    ForwardResult<T> forward(const ad::Var<T>& vis, const ad::Var<T>& ir) {
        if (vis.c() != 3 || ir.c() != 3) throw std::invalid_argument("Model: inputs must be RGB");
        ad::check_same_shape(vis, ir, "Model::forward");
        const auto& bb = cfg_.backbone;
        const double ffn = bb.ffn_expansion;

        auto ev = encoder_forward(ps_, "enc.vis", vis, bb);
        auto ei = encoder_forward(ps_, "enc.ir", ir, bb);

        ForwardResult<T> out;
        auto dv = decoder_stage_deepest(ps_, "dec.vis.s1", ev.level[3], bb);
        auto di = decoder_stage_deepest(ps_, "dec.ir.s1", ei.level[3], bb);
        auto re = re_block(ps_, "re.s1", dv, di, bb.heads[3], ffn, cfg_.enhance);
        out.rd_vis[0] = re.rd_a;
        out.rd_ir[0] = re.rd_b;

        for (int stage = 2; stage <= 4; ++stage) {
            const int lv = 4 - stage;  // encoder level index of the target resolution
            const std::string sv = "dec.vis.s" + std::to_string(stage);
            const std::string si = "dec.ir.s" + std::to_string(stage);
            dv = decoder_stage(ps_, sv, re.a, ev.level[lv], bb.level_blocks[lv],
                               bb.heads[lv], ffn);
            di = decoder_stage(ps_, si, re.b, ei.level[lv], bb.level_blocks[lv],
                               bb.heads[lv], ffn);
            re = re_block(ps_, "re.s" + std::to_string(stage), dv, di, bb.heads[lv], ffn,
                          cfg_.enhance);
            out.rd_vis[stage - 1] = re.rd_a;
            out.rd_ir[stage - 1] = re.rd_b;
        }
        out.fused = fuse_block(ps_, "fuse", re.a, re.b, bb);
        return out;
    }

    ParameterStore<T>& params() { return ps_; }
    const ParameterStore<T>& params() const { return ps_; }
    const ModelConfig& config() const { return cfg_; }

  private:
    ModelConfig cfg_;
    ParameterStore<T> ps_;
};

}  // namespace dreamif
