#pragma once

#include <functional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "ladlenet/config.hpp"
#include "ladlenet/data.hpp"
#include "ladlenet/model.hpp"

namespace ladlenet {

class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

/// Reduce-on-plateau with cooldown. While cooling down the non-improvement
/// counter is frozen; reaching `patience` non-improving epochs multiplies the
/// rate by `factor`, resets the counter and starts the cooldown.
struct LrScheduleState {
    double current_lr;
    double best_loss = std::numeric_limits<double>::infinity();
    int non_improve_count = 0;
    int cooldown_remaining = 0;
    double factor = 0.1;
    int patience = 2;
    int cooldown = 5;

    static LrScheduleState from(const OptimizerConfig& opt, const SchedulerConfig& sched) {
        return {opt.lr0, std::numeric_limits<double>::infinity(), 0, 0,
                sched.factor, sched.patience, sched.cooldown};
    }
};

/// Advances the schedule by one epoch. Throws on non-finite loss.
LrScheduleState scheduler_step(LrScheduleState state, double epoch_loss);

struct TrainState {
    NetworkAssembly model;
    LrScheduleState schedule;
    int epoch = 0;
    uint64_t seed = 0;
    std::vector<double> loss_history;  // per-epoch mean training loss
    std::vector<double> lr_history;
};

struct TrainOptions {
    int epochs = 120;
    int batch_size = 40;
    uint64_t seed = 0;
    int checkpoint_every = 10;   // <= 0 disables periodic checkpoints
    std::string output_dir;      // empty disables checkpointing entirely
    std::string snapshot_pair;   // frame id for per-epoch Handle snapshots
    int max_steps = 0;           // > 0 caps total optimization steps (smoke tests)
    std::function<void(int epoch, double mean_loss, double lr)> on_epoch;
};

/// Minimizes the composite training objective with Adam over the manifest's
/// train split. Returns the final state; writes periodic and best
/// checkpoints plus a loss-curve CSV when an output dir is given.
TrainState train(NetworkAssembly model, const DatasetManifest& manifest,
                 const LossConfig& loss_cfg, const OptimizerConfig& opt_cfg,
                 const SchedulerConfig& sched_cfg, const PreprocessSpec& spec,
                 const TrainOptions& options);

/// Writes the Handle module's output for one pair as an 8-bit PNG named by
/// epoch. Returns the file path.
std::string snapshot_handle(NetworkAssembly& model, const ImagePair& sample,
                            const PreprocessSpec& spec, int epoch,
                            const std::string& out_dir);

/// Writes a (3,H,W) or (1,3,H,W) tensor in [0,1] as an 8-bit RGB PNG.
void write_png(const torch::Tensor& img, const std::string& path);

/// Binary container of named parameter/buffer/optimizer arrays plus a JSON
/// sidecar (<path>.json) carrying epoch, seed, fingerprint, schedule and
/// loss history. Writes are atomic (temp then rename).
void save_checkpoint(const TrainState& state, const LossConfig& loss_cfg,
                     const std::string& path, torch::optim::Adam* optimizer = nullptr);

/// Loads a checkpoint into a freshly built assembly. Throws on corrupt files
/// or on a model/loss fingerprint mismatch.
TrainState load_checkpoint(const std::string& path, const ModelConfig& model_cfg,
                           const LossConfig& loss_cfg,
                           torch::optim::Adam* optimizer = nullptr);

/// Loads a checkpoint using the model/loss configs stored in its sidecar.
TrainState load_checkpoint_auto(const std::string& path, LossConfig* loss_out = nullptr);

/// Writes the per-epoch loss curve as CSV (epoch, mean_loss, lr).
void write_loss_curve(const TrainState& state, const std::string& path);

}  // namespace ladlenet
