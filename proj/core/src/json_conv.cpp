#include <string>

#include "dreamif/errors.hpp"
#include "dreamif/losses.hpp"
#include "dreamif/metrics.hpp"
#include "json_detail.hpp"

// JSON encoders/decoders for the public config and report structs. Decoders
// fill missing optional fields from the struct defaults and reject wrongly
// typed or structurally invalid values with FormatError.

namespace dreamif {
namespace detail {

namespace {

template <std::size_t N>
std::array<int, N> int_array(const nlohmann::json& j, const char* field) {
    if (!j.is_array() || j.size() != N)
        throw FormatError(std::string("config: ") + field + " must be an array of " +
                          std::to_string(N) + " ints");
    std::array<int, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = j.at(i).get<int>();
    return out;
}

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json j{
        {"backbone",
         {{"base_dim", cfg.backbone.base_dim},
          {"level_blocks", cfg.backbone.level_blocks},
          {"heads", cfg.backbone.heads},
          {"ffn_expansion", cfg.backbone.ffn_expansion},
          {"fuse_blocks", cfg.backbone.fuse_blocks}}},
        {"prompt", {{"n", cfg.enhance.prompt_n}, {"base_size", cfg.enhance.prompt_base}}},
        {"use_ce", cfg.enhance.use_ce},
        {"use_se", cfg.enhance.use_se},
        {"seed", cfg.seed},
    };
    if (cfg.enhance.rd_pair_softmax) j["rd_pair_softmax"] = true;
    return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;  // defaults fill anything the document omits
    if (!j.is_object()) throw FormatError("model config: document is not an object");
    if (j.contains("backbone")) {
        const auto& b = j.at("backbone");
        if (!b.is_object()) throw FormatError("model config: backbone is not an object");
        cfg.backbone.base_dim = b.value("base_dim", cfg.backbone.base_dim);
        if (b.contains("level_blocks"))
            cfg.backbone.level_blocks = int_array<4>(b.at("level_blocks"), "level_blocks");
        if (b.contains("heads")) cfg.backbone.heads = int_array<4>(b.at("heads"), "heads");
        cfg.backbone.ffn_expansion = b.value("ffn_expansion", cfg.backbone.ffn_expansion);
        cfg.backbone.fuse_blocks = b.value("fuse_blocks", cfg.backbone.fuse_blocks);
    }
    if (j.contains("prompt")) {
        const auto& p = j.at("prompt");
        if (!p.is_object()) throw FormatError("model config: prompt is not an object");
        cfg.enhance.prompt_n = p.value("n", cfg.enhance.prompt_n);
        cfg.enhance.prompt_base = p.value("base_size", cfg.enhance.prompt_base);
    }
    cfg.enhance.use_ce = j.value("use_ce", cfg.enhance.use_ce);
    cfg.enhance.use_se = j.value("use_se", cfg.enhance.use_se);
    cfg.enhance.rd_pair_softmax = j.value("rd_pair_softmax", cfg.enhance.rd_pair_softmax);
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

nlohmann::json degradation_spec_to_json(const DegradationSpec& spec) {
    return {{"kind", to_string(spec.kind)}, {"sigma", spec.sigma}, {"lam", spec.lam},
            {"eps", spec.eps},              {"seed", spec.seed}};
}

DegradationSpec degradation_spec_from_json(const nlohmann::json& j) {
    DegradationSpec spec;
    if (!j.is_object()) throw FormatError("degradation spec: document is not an object");
    if (j.contains("kind")) spec.kind = degradation_kind_from_string(j.at("kind").get<std::string>());
    spec.sigma = j.value("sigma", spec.sigma);
    spec.lam = j.value("lam", spec.lam);
    spec.eps = j.value("eps", spec.eps);
    spec.seed = j.value("seed", spec.seed);
    return spec;
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    nlohmann::json kinds = nlohmann::json::array();
    for (const auto k : cfg.degrade_kinds) kinds.push_back(to_string(k));
    return {{"batch_size", cfg.batch_size},
            {"total_steps", cfg.total_steps},
            {"lr_init", cfg.lr_init},
            {"lr_final", cfg.lr_final},
            {"beta1", cfg.beta1},
            {"beta2", cfg.beta2},
            {"weight_decay", cfg.weight_decay},
            {"adam_eps", cfg.adam_eps},
            {"degrade_prob", cfg.degrade_prob},
            {"degrade_kinds", std::move(kinds)},
            {"crop", cfg.crop},
            {"seed", cfg.seed},
            {"clip_norm", cfg.clip_norm},
            {"checkpoint_interval", cfg.checkpoint_interval},
            {"loss_weights",
             {{"pixel", cfg.loss_weights.pixel},
              {"grad", cfg.loss_weights.grad},
              {"ssim", cfg.loss_weights.ssim},
              {"color", cfg.loss_weights.color}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    if (!j.is_object()) throw FormatError("train config: document is not an object");
    if (!j.contains("total_steps")) throw FormatError("train config: total_steps is required");
    cfg.total_steps = j.at("total_steps").get<std::int64_t>();
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.lr_init = j.value("lr_init", cfg.lr_init);
    cfg.lr_final = j.value("lr_final", cfg.lr_final);
    cfg.beta1 = j.value("beta1", cfg.beta1);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
    cfg.degrade_prob = j.value("degrade_prob", cfg.degrade_prob);
    if (j.contains("degrade_kinds")) {
        const auto& arr = j.at("degrade_kinds");
        if (!arr.is_array()) throw FormatError("train config: degrade_kinds must be an array");
        cfg.degrade_kinds.clear();
        for (const auto& k : arr)
            cfg.degrade_kinds.insert(degradation_kind_from_string(k.get<std::string>()));
    }
    cfg.crop = j.value("crop", cfg.crop);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.clip_norm = j.value("clip_norm", cfg.clip_norm);
    cfg.checkpoint_interval = j.value("checkpoint_interval", cfg.checkpoint_interval);
    if (j.contains("loss_weights")) {
        const auto& w = j.at("loss_weights");
        if (!w.is_object()) throw FormatError("train config: loss_weights must be an object");
        cfg.loss_weights.pixel = w.value("pixel", cfg.loss_weights.pixel);
        cfg.loss_weights.grad = w.value("grad", cfg.loss_weights.grad);
        cfg.loss_weights.ssim = w.value("ssim", cfg.loss_weights.ssim);
        cfg.loss_weights.color = w.value("color", cfg.loss_weights.color);
    }
    return cfg;
}

}  // namespace detail

namespace {

nlohmann::json parse_or_throw(const std::string& text, const char* what) {
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw FormatError(std::string(what) + ": malformed JSON");
    return j;
}

// json type errors (e.g. a string where a number belongs) surface as
// FormatError so callers see one failure type for one failure class.
template <typename F>
auto format_guard(const char* what, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string(what) + ": " + e.what());
    }
}

}  // namespace

std::string to_json(const ModelConfig& cfg) { return detail::model_config_to_json(cfg).dump(); }

ModelConfig model_config_from_json(const std::string& text) {
    const auto j = parse_or_throw(text, "model config");
    return format_guard("model config", [&] { return detail::model_config_from_json(j); });
}

std::string to_json(const DegradationSpec& spec) {
    return detail::degradation_spec_to_json(spec).dump();
}

DegradationSpec degradation_spec_from_json(const std::string& text) {
    const auto j = parse_or_throw(text, "degradation spec");
    return format_guard("degradation spec",
                        [&] { return detail::degradation_spec_from_json(j); });
}

std::string to_json(const TrainConfig& cfg) { return detail::train_config_to_json(cfg).dump(); }

TrainConfig train_config_from_json(const std::string& text) {
    const auto j = parse_or_throw(text, "train config");
    return format_guard("train config", [&] { return detail::train_config_from_json(j); });
}

std::string to_json(const LossBreakdown& l) {
    return nlohmann::json{{"pixel", l.pixel},
                          {"grad", l.grad},
                          {"ssim", l.ssim},
                          {"color", l.color},
                          {"total", l.total}}
        .dump();
}

std::string to_json(const MetricReport& r) {
    return nlohmann::json{
        {"ei", r.ei}, {"ag", r.ag}, {"psnr", r.psnr}, {"qabf", r.qabf}, {"viff", r.viff}}
        .dump();
}

}  // namespace dreamif
