#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dreamif/dataio.hpp"
#include "dreamif/degrade.hpp"
#include "dreamif/losses.hpp"
#include "dreamif/model.hpp"

// Deterministic training loop: decoupled-weight-decay Adam with a per-step
// cosine learning-rate schedule, training on randomly degraded inputs against
// clean targets. Given (seed, data, config) the parameter trajectory and the
// history file are bit-reproducible on one platform.

namespace dreamif {

struct TrainConfig {
    int batch_size = 4;
    std::int64_t total_steps = 0;  // required; every run must set it
    double lr_init = 1e-4;
    double lr_final = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 1e-4;
    double adam_eps = 1e-8;
    double degrade_prob = 0.5;  // chance a sample's inputs get degraded
    std::set<DegradationKind> degrade_kinds = {DegradationKind::gaussian,
                                               DegradationKind::poisson,
                                               DegradationKind::speckle,
                                               DegradationKind::triplet};
    int crop = 64;
    std::uint64_t seed = 0;
    double clip_norm = 0.0;                // global-norm gradient clip; 0 = off
    std::int64_t checkpoint_interval = 0;  // extra checkpoints every k steps; 0 = end only
    LossWeights loss_weights;
};

std::string to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

// lr(step) = lr_final + (lr_init - lr_final) * (1 + cos(pi * step/total)) / 2,
// hitting the endpoints exactly.
double cosine_lr(std::int64_t step, const TrainConfig& cfg);

// First/second moments per parameter plus the shared step counter.
struct AdamWState {
    std::map<std::string, std::pair<std::vector<float>, std::vector<float>>> moments;
    std::int64_t t = 0;
};

// One optimization step over a batch: maybe-degrade the inputs (targets stay
// clean), accumulate gradients of the batch-mean objective, update parameters
// with cosine_lr(step). Returns the batch-mean loss breakdown.
LossBreakdown train_step(Model<float>& model, const std::vector<ImagePair>& batch,
                         const TrainConfig& cfg, RandomSource& rng, std::int64_t step,
                         AdamWState& opt);

struct HistoryEntry {
    std::int64_t step = 0;
    double lr = 0.0;
    LossBreakdown loss;
};

struct TrainOutput {
    std::vector<HistoryEntry> history;
    std::string checkpoint_path;  // final checkpoint
    std::string history_path;     // JSON-lines log, one entry per step
};

// Runs total_steps batches over seeded epoch shuffles of `data`, logging one
// JSON line per step under out_dir and checkpointing at the end (and every
// checkpoint_interval steps when set). A non-finite loss aborts with
// NumericError naming the step.
TrainOutput train(Model<float>& model, const PairedDataset& data, const TrainConfig& cfg,
                  const std::string& out_dir);

}  // namespace dreamif
