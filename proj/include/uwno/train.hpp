#pragma once

#include "uwno/data.hpp"
#include "uwno/model.hpp"
#include "uwno/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace uwno {

struct TrainConfig {
    int epochs = 500;
    int batch_size = 8;
    float learning_rate = 1e-3f;
    uint64_t seed = 0;
    float smooth = 1.0f;          // additive smoothing of the dice surrogate
    float val_fraction = 0.1f;
    std::string out_dir = "runs";
};

// Differentiable dice surrogate over the whole batch jointly:
//   1 - (2*sum(probs*gt) + smooth) / (sum(probs) + sum(gt) + smooth)
Tensor soft_dice_loss(const Tensor& probs, const Tensor& gt, float smooth = 1.0f);

// Adam with bias correction; moment buffers are keyed by parameter position,
// so the same parameter list must be passed every step.
struct AdamState {
    struct Slot {
        std::vector<float> m, v;
    };
    std::vector<Slot> slots;
    int64_t step_count = 0;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// In-place update from the gradients stored on the parameters; a parameter
// without a populated gradient is a state error.
void adam_step(std::vector<Tensor>& params, AdamState& state, float lr);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double train_dice = 0.0;
    double val_dice = 0.0;        // NaN when there is no validation split
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::string final_checkpoint;
    std::string best_checkpoint;  // empty when there is no validation split
    std::string metrics_path;
};

// Full training run: deterministic shuffling and batching from the seed,
// one metrics line per epoch appended to <out_dir>/metrics.jsonl, final
// checkpoint always written, best-validation checkpoint when a split exists.
// A non-finite loss aborts with a diagnostic. on_epoch, when set, sees each
// record as it is produced.
using EpochCallback = std::function<void(const EpochRecord&)>;
TrainResult train_loop(const UwnoConfig& model_cfg, const TrainConfig& train_cfg,
                       const std::vector<Sample>& dataset,
                       const EpochCallback& on_epoch = {});

// Checkpoints: magic "UWNO", little-endian u32 version, little-endian u64
// header length, JSON array [{name, shape, offset}], then raw little-endian
// float payloads. Round trips are bit-exact.
void save_checkpoint(UwnoParams& params, const std::string& path);
void load_checkpoint(UwnoParams& params, const std::string& path);

} // namespace uwno
