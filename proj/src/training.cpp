#include "ladlenet/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <opencv2/opencv.hpp>

#include "ladlenet/losses.hpp"

namespace fs = std::filesystem;

namespace ladlenet {

LrScheduleState scheduler_step(LrScheduleState state, double epoch_loss) {
    if (!std::isfinite(epoch_loss))
        throw TrainingError("scheduler_step: non-finite epoch loss");
    if (state.cooldown_remaining > 0) {
        state.cooldown_remaining -= 1;
    } else if (epoch_loss < state.best_loss) {
        state.best_loss = epoch_loss;
        state.non_improve_count = 0;
    } else {
        state.non_improve_count += 1;
        if (state.non_improve_count >= state.patience) {
            state.current_lr *= state.factor;
            state.non_improve_count = 0;
            state.cooldown_remaining = state.cooldown;
        }
    }
    return state;
}

namespace {

void set_lr(torch::optim::Adam& optimizer, double lr) {
    for (auto& group : optimizer.param_groups())
        static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

torch::optim::Adam make_optimizer(NetworkAssembly& model, const OptimizerConfig& cfg) {
    std::vector<torch::Tensor> params;
    for (auto& p : model.model->parameters())
        if (p.requires_grad()) params.push_back(p);
    auto opts = torch::optim::AdamOptions(cfg.lr0)
                    .betas(std::make_tuple(cfg.beta1, cfg.beta2))
                    .eps(cfg.eps)
                    .weight_decay(cfg.weight_decay)
                    .amsgrad(cfg.amsgrad);
    return torch::optim::Adam(params, opts);
}

}  // namespace

void write_png(const torch::Tensor& img, const std::string& path) {
    auto t = img.dim() == 4 ? img.squeeze(0) : img;
    if (t.dim() != 3 || t.size(0) != 3)
        throw TrainingError("write_png: expected a (3,H,W) tensor");
    auto u8 = (t.detach().to(torch::kFloat32).clamp(0, 1) * 255.0)
                  .round()
                  .to(torch::kUInt8)
                  .permute({1, 2, 0})
                  .contiguous();
    cv::Mat rgb(static_cast<int>(t.size(1)), static_cast<int>(t.size(2)), CV_8UC3,
                u8.data_ptr());
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path, bgr, {cv::IMWRITE_PNG_COMPRESSION, 3}))
        throw TrainingError("write_png: cannot write " + path);
}

std::string snapshot_handle(NetworkAssembly& model, const ImagePair& sample,
                            const PreprocessSpec& spec, int epoch, const std::string& out_dir) {
    fs::create_directories(out_dir);
    auto [tir, vi] = preprocess(sample, spec);
    (void)vi;
    const bool was_training = model.model->is_training();
    model.eval();
    torch::Tensor handle_out;
    {
        torch::NoGradGuard guard;
        handle_out = model.forward(tir.unsqueeze(0)).second;
    }
    model.train(was_training);
    char name[64];
    snprintf(name, sizeof(name), "handle_epoch_%04d.png", epoch);
    const std::string path = (fs::path(out_dir) / name).string();
    write_png(handle_out, path);
    return path;
}

void save_checkpoint(const TrainState& state, const LossConfig& loss_cfg,
                     const std::string& path, torch::optim::Adam* optimizer) {
    torch::serialize::OutputArchive archive;
    for (const auto& p : state.model.model->named_parameters())
        archive.write("model/" + p.key(), p.value());
    for (const auto& b : state.model.model->named_buffers())
        archive.write("model/buffer/" + b.key(), b.value(), /*is_buffer=*/true);
    if (optimizer) {
        torch::serialize::OutputArchive opt_archive;
        optimizer->save(opt_archive);
        archive.write("optimizer", opt_archive);
    }
    const std::string tmp = path + ".tmp";
    archive.save_to(tmp);
    fs::rename(tmp, path);

    nlohmann::json j;
    j["fingerprint"] = config_fingerprint(state.model.config, loss_cfg);
    j["epoch"] = state.epoch;
    j["seed"] = state.seed;
    j["loss_history"] = state.loss_history;
    j["lr_history"] = state.lr_history;
    // JSON has no infinity; an untouched best_loss is stored as null
    j["schedule"] = {{"current_lr", state.schedule.current_lr},
                     {"best_loss", std::isfinite(state.schedule.best_loss)
                                       ? nlohmann::json(state.schedule.best_loss)
                                       : nlohmann::json(nullptr)},
                     {"non_improve_count", state.schedule.non_improve_count},
                     {"cooldown_remaining", state.schedule.cooldown_remaining},
                     {"factor", state.schedule.factor},
                     {"patience", state.schedule.patience},
                     {"cooldown", state.schedule.cooldown}};
    j["model_config"] = state.model.config;
    j["loss_config"] = loss_cfg;
    j["has_optimizer"] = optimizer != nullptr;
    const std::string jtmp = path + ".json.tmp";
    std::ofstream out(jtmp);
    if (!out) throw TrainingError("cannot write checkpoint sidecar: " + path + ".json");
    out << j.dump(2) << "\n";
    out.close();
    fs::rename(jtmp, path + ".json");
}

TrainState load_checkpoint(const std::string& path, const ModelConfig& model_cfg,
                           const LossConfig& loss_cfg, torch::optim::Adam* optimizer) {
    std::ifstream in(path + ".json");
    if (!in) throw TrainingError("checkpoint sidecar missing: " + path + ".json");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw TrainingError("corrupt checkpoint sidecar: " + std::string(e.what()));
    }
    const std::string expect = config_fingerprint(model_cfg, loss_cfg);
    if (j.value("fingerprint", "") != expect)
        throw TrainingError("checkpoint fingerprint mismatch: expected " + expect + ", found " +
                            j.value("fingerprint", "<none>"));

    TrainState state;
    state.epoch = j.value("epoch", 0);
    state.seed = j.value("seed", 0ull);
    state.loss_history = j.value("loss_history", std::vector<double>{});
    state.lr_history = j.value("lr_history", std::vector<double>{});
    if (j.contains("schedule")) {
        const auto& s = j["schedule"];
        const auto best = s.contains("best_loss") && s["best_loss"].is_number()
                              ? s["best_loss"].get<double>()
                              : std::numeric_limits<double>::infinity();
        state.schedule = {s.value("current_lr", 0.01),
                          best,
                          s.value("non_improve_count", 0),
                          s.value("cooldown_remaining", 0),
                          s.value("factor", 0.1),
                          s.value("patience", 2),
                          s.value("cooldown", 5)};
    }

    state.model = build_ladlenet(model_cfg, state.seed);
    torch::serialize::InputArchive archive;
    try {
        archive.load_from(path);
    } catch (const c10::Error&) {
        throw TrainingError("corrupt checkpoint file: " + path);
    }
    torch::NoGradGuard guard;
    for (auto& p : state.model.model->named_parameters()) {
        torch::Tensor t;
        if (!archive.try_read("model/" + p.key(), t))
            throw TrainingError("corrupt checkpoint: missing tensor " + p.key());
        p.value().copy_(t);
    }
    for (auto& b : state.model.model->named_buffers()) {
        torch::Tensor t;
        if (!archive.try_read("model/buffer/" + b.key(), t, /*is_buffer=*/true))
            throw TrainingError("corrupt checkpoint: missing buffer " + b.key());
        b.value().copy_(t);
    }
    if (optimizer && j.value("has_optimizer", false)) {
        torch::serialize::InputArchive opt_archive;
        if (archive.try_read("optimizer", opt_archive)) optimizer->load(opt_archive);
    }
    return state;
}

TrainState load_checkpoint_auto(const std::string& path, LossConfig* loss_out) {
    std::ifstream in(path + ".json");
    if (!in) throw TrainingError("checkpoint sidecar missing: " + path + ".json");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw TrainingError("corrupt checkpoint sidecar: " + std::string(e.what()));
    }
    ModelConfig model_cfg = j.at("model_config").get<ModelConfig>();
    LossConfig loss_cfg = j.at("loss_config").get<LossConfig>();
    if (loss_out) *loss_out = loss_cfg;
    return load_checkpoint(path, model_cfg, loss_cfg);
}

void write_loss_curve(const TrainState& state, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw TrainingError("cannot write loss curve: " + path);
    out << "epoch,mean_loss,lr\n";
    out << std::setprecision(10);
    for (size_t i = 0; i < state.loss_history.size(); ++i)
        out << (i + 1) << "," << state.loss_history[i] << "," << state.lr_history[i] << "\n";
}

TrainState train(NetworkAssembly model, const DatasetManifest& manifest,
                 const LossConfig& loss_cfg, const OptimizerConfig& opt_cfg,
                 const SchedulerConfig& sched_cfg, const PreprocessSpec& spec,
                 const TrainOptions& options) {
    loss_cfg.validate();
    opt_cfg.validate();
    if (!manifest.split_done) throw TrainingError("train: manifest has no split");

    TrainState state;
    state.model = std::move(model);
    state.seed = options.seed;
    state.schedule = LrScheduleState::from(opt_cfg, sched_cfg);

    if (options.epochs == 0) return state;

    const ImagePair* snapshot_sample = nullptr;
    if (!options.snapshot_pair.empty()) {
        for (const auto& p : manifest.pairs)
            if (p.frame_id == options.snapshot_pair) snapshot_sample = &p;
        if (!snapshot_sample)
            throw TrainingError("train: snapshot pair not in manifest: " + options.snapshot_pair);
    }
    if (!options.output_dir.empty()) fs::create_directories(options.output_dir);

    auto optimizer = make_optimizer(state.model, opt_cfg);
    torch::manual_seed(options.seed);
    state.model.train();

    int steps = 0;
    double best_epoch_loss = std::numeric_limits<double>::infinity();
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        BatchStream stream(manifest, Split::Train, options.batch_size, options.seed, epoch, spec);
        double loss_sum = 0;
        int64_t sample_count = 0;
        bool step_cap_hit = false;
        while (auto batch = stream.next()) {
            auto& [tir, vi] = *batch;
            auto [fvi, handle_out] = state.model.forward(tir);
            (void)handle_out;
            auto loss = total_loss(fvi, vi, loss_cfg);
            const double loss_val = loss.item<double>();
            if (!std::isfinite(loss_val)) {
                if (!options.output_dir.empty()) {
                    state.epoch = epoch;
                    save_checkpoint(state, loss_cfg,
                                    (fs::path(options.output_dir) / "diagnostic.ckpt").string(),
                                    &optimizer);
                }
                throw TrainingError("train: non-finite loss at epoch " +
                                    std::to_string(epoch + 1) + " (diagnostic checkpoint written)");
            }
            optimizer.zero_grad();
            loss.backward();
            optimizer.step();
            loss_sum += loss_val * static_cast<double>(tir.size(0));
            sample_count += tir.size(0);
            if (options.max_steps > 0 && ++steps >= options.max_steps) {
                step_cap_hit = true;
                break;
            }
        }
        const double mean_loss = loss_sum / static_cast<double>(sample_count);
        state.loss_history.push_back(mean_loss);
        state.lr_history.push_back(state.schedule.current_lr);
        state.epoch = epoch + 1;
        state.schedule = scheduler_step(state.schedule, mean_loss);
        set_lr(optimizer, state.schedule.current_lr);
        if (options.on_epoch) options.on_epoch(state.epoch, mean_loss, state.schedule.current_lr);

        if (snapshot_sample && !options.output_dir.empty())
            snapshot_handle(state.model, *snapshot_sample, spec, state.epoch,
                            (fs::path(options.output_dir) / "snapshots").string());
        if (!options.output_dir.empty()) {
            if (options.checkpoint_every > 0 && state.epoch % options.checkpoint_every == 0) {
                char name[64];
                snprintf(name, sizeof(name), "epoch_%04d.ckpt", state.epoch);
                save_checkpoint(state, loss_cfg, (fs::path(options.output_dir) / name).string(),
                                &optimizer);
            }
            if (mean_loss < best_epoch_loss) {
                best_epoch_loss = mean_loss;
                save_checkpoint(state, loss_cfg,
                                (fs::path(options.output_dir) / "best.ckpt").string(), &optimizer);
            }
        }
        if (step_cap_hit) break;
    }
    if (!options.output_dir.empty()) {
        save_checkpoint(state, loss_cfg, (fs::path(options.output_dir) / "last.ckpt").string(),
                        &optimizer);
        write_loss_curve(state, (fs::path(options.output_dir) / "loss_curve.csv").string());
    }
    return state;
}

}  // namespace ladlenet
