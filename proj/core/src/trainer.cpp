#include "dreamif/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "dreamif/errors.hpp"
#include "dreamif/model_io.hpp"

namespace dreamif {

double cosine_lr(std::int64_t step, const TrainConfig& cfg) {
    if (cfg.total_steps < 1) throw std::invalid_argument("cosine_lr: total_steps must be >= 1");
    if (step < 0 || step > cfg.total_steps)
        throw std::invalid_argument("cosine_lr: step outside [0, total_steps]");
    // Early returns pin the endpoints exactly; cos() noise stays inside.
    if (step == 0) return cfg.lr_init;
    if (step == cfg.total_steps) return cfg.lr_final;
    const double t = static_cast<double>(step) / static_cast<double>(cfg.total_steps);
    return cfg.lr_final +
           0.5 * (cfg.lr_init - cfg.lr_final) * (1.0 + std::cos(std::numbers::pi * t));
}

namespace {

ad::Var<float> as_input(const Image& img) {
    return ad::Var<float>::constant(img.to_rgb().to_tensor_f32());
}

}  // namespace

LossBreakdown train_step(Model<float>& model, const std::vector<ImagePair>& batch,
                         const TrainConfig& cfg, RandomSource& rng, std::int64_t step,
                         AdamWState& opt) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    auto& ps = model.params();
    ps.clear_grads();

    const auto b = static_cast<double>(batch.size());
    LossBreakdown mean;
    for (const auto& sample : batch) {
        Image vis_in = sample.vis;
        Image ir_in = sample.ir;
        // One coin per sample; both inputs get their own independent spec so
        // the model never learns a correlation between the two noise fields.
        if (cfg.degrade_prob > 0.0 && rng.uniform() < cfg.degrade_prob) {
            vis_in = apply(vis_in, sample_spec(rng, cfg.degrade_kinds));
            ir_in = apply(ir_in, sample_spec(rng, cfg.degrade_kinds));
        }
        auto out = model.forward(as_input(vis_in), as_input(ir_in));
        // Targets are always the clean pair: the objective is restore + fuse.
        auto terms =
            fusion_loss(out.fused, as_input(sample.vis), as_input(sample.ir), cfg.loss_weights);
        ad::scale(terms.total, static_cast<float>(1.0 / b)).backward();
        mean.pixel += terms.pixel.scalar() / b;
        mean.grad += terms.grad.scalar() / b;
        mean.ssim += terms.ssim.scalar() / b;
        mean.color += terms.color.scalar() / b;
        mean.total += terms.total.scalar() / b;
    }

    if (!std::isfinite(mean.total)) {
        std::ostringstream msg;
        msg << "train_step: non-finite loss at step " << step << " (pixel=" << mean.pixel
            << " grad=" << mean.grad << " ssim=" << mean.ssim << " color=" << mean.color << ")";
        throw NumericError(msg.str());
    }

    if (cfg.clip_norm > 0.0) {
        double sq = 0.0;
        for (auto& [name, p] : ps)
            if (p.has_grad())
                for (const float g : p.grad().v) sq += static_cast<double>(g) * g;
        const double norm = std::sqrt(sq);
        if (norm > cfg.clip_norm) {
            const auto s = static_cast<float>(cfg.clip_norm / norm);
            for (auto& [name, p] : ps)
                if (p.has_grad())
                    for (auto& v : p.mutable_grad().v) v *= s;
        }
    }

    const double lr = cosine_lr(step, cfg);
    opt.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.t));
    for (auto& [name, p] : ps) {
        auto& val = p.mutable_value();
        const std::size_t n = val.size();
        auto& [m1, m2] = opt.moments[name];
        if (m1.empty()) {
            m1.assign(n, 0.0f);
            m2.assign(n, 0.0f);
        } else if (m1.size() != n) {
            throw std::invalid_argument("train_step: optimizer state shape mismatch for " + name);
        }
        const bool has_g = p.has_grad();
        const float* g = has_g ? p.grad().data() : nullptr;
        for (std::size_t i = 0; i < n; ++i) {
            const double gi = has_g ? static_cast<double>(g[i]) : 0.0;
            const double m = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * gi;
            const double v = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * gi * gi;
            m1[i] = static_cast<float>(m);
            m2[i] = static_cast<float>(v);
            // Decoupled weight decay: the penalty skips the moment estimates.
            const double upd = (m / bc1) / (std::sqrt(v / bc2) + cfg.adam_eps) +
                               cfg.weight_decay * static_cast<double>(val.v[i]);
            val.v[i] = static_cast<float>(val.v[i] - lr * upd);
        }
    }
    return mean;
}

TrainOutput train(Model<float>& model, const PairedDataset& data, const TrainConfig& cfg,
                  const std::string& out_dir) {
    if (cfg.total_steps < 1) throw std::invalid_argument("train: total_steps must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (cfg.crop < 8 || cfg.crop % 8 != 0)
        throw std::invalid_argument("train: crop must be a positive multiple of 8");
    if (data.empty()) throw EmptyDatasetError("train: dataset is empty");
#ifdef __GLIBC__
    // Tapes allocate and free large blocks every step; keeping them off mmap
    // lets the allocator actually reuse the pages.
    mallopt(M_MMAP_THRESHOLD, 128 * 1024 * 1024);
#endif
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("train: cannot create " + out_dir + ": " + ec.message());

    // Small datasets stay resident; larger ones stream from disk per use.
    std::vector<ImagePair> cache;
    const bool cached = data.size() <= 64;
    if (cached) {
        cache.reserve(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) cache.push_back(data.load(i));
    }

    RandomSource rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t pos = order.size();  // forces a shuffle before the first draw
    auto next_index = [&] {
        if (pos == order.size()) {
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[rng.uniform_index(i)]);
            pos = 0;
        }
        return order[pos++];
    };

    const std::string hist_path = (fs::path(out_dir) / "history.jsonl").string();
    std::ofstream hist(hist_path, std::ios::trunc);
    if (!hist) throw IoError("train: cannot open " + hist_path);
    hist.precision(17);

    TrainOutput out;
    out.history_path = hist_path;
    out.history.reserve(static_cast<std::size_t>(cfg.total_steps));
    AdamWState opt;
    std::vector<ImagePair> batch(static_cast<std::size_t>(cfg.batch_size));
    for (std::int64_t s = 0; s < cfg.total_steps; ++s) {
        for (auto& slot : batch) {
            const std::size_t idx = next_index();
            ImagePair loaded;  // keeps a streamed pair alive through the crop
            const ImagePair* full = cached ? &cache[idx] : (loaded = data.load(idx), &loaded);
            const bool exact =
                full->vis.height() == cfg.crop && full->vis.width() == cfg.crop;
            slot = exact ? *full : random_crop_pair(*full, cfg.crop, rng);
        }
        HistoryEntry e;
        e.step = s;
        e.lr = cosine_lr(s, cfg);
        e.loss = train_step(model, batch, cfg, rng, s, opt);
        hist << "{\"step\":" << e.step << ",\"lr\":" << e.lr << ",\"pixel\":" << e.loss.pixel
             << ",\"grad\":" << e.loss.grad << ",\"ssim\":" << e.loss.ssim
             << ",\"color\":" << e.loss.color << ",\"total\":" << e.loss.total << "}\n";
        out.history.push_back(e);
        const std::int64_t done = s + 1;
        if (cfg.checkpoint_interval > 0 && done % cfg.checkpoint_interval == 0 &&
            done != cfg.total_steps) {
            const auto p = fs::path(out_dir) / ("checkpoint_step" + std::to_string(done) + ".drif");
            save_checkpoint(p.string(), model, done);
        }
    }
    hist.flush();
    if (!hist) throw IoError("train: failed writing " + hist_path);
    out.checkpoint_path = (fs::path(out_dir) / "checkpoint.drif").string();
    save_checkpoint(out.checkpoint_path, model, cfg.total_steps);
    return out;
}

}  // namespace dreamif
