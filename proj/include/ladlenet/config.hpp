#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ladlenet {

/// Thrown when a config invariant is violated. The message names the
/// violated invariant so callers (and the CLI) can surface it verbatim.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct TensorSpec {
    int64_t batch = 1;
    int64_t channels = 3;
    int64_t height = 192;
    int64_t width = 256;

    void validate() const;
};

enum class Backbone {
    BuiltinUnet,
    BridgedUnet,
    SegmentationBackbone,
};

std::string to_string(Backbone b);
Backbone backbone_from_string(const std::string& s);

struct VariantFlags {
    bool cross_concat = true;
    bool cross_skip = true;
    Backbone backbone = Backbone::BuiltinUnet;

    static VariantFlags baseline() { return {false, false, Backbone::BuiltinUnet}; }
    static VariantFlags full() { return {true, true, Backbone::BuiltinUnet}; }

    void validate() const;
};

struct ModelConfig {
    VariantFlags variant;
    std::vector<int64_t> encoder_channels = {64, 128, 256, 512};
    int64_t code_channels = 1024;
    int64_t handle_out_channels = 3;
    int64_t bowl_out_channels = 3;
    // segmentation-backbone only
    int64_t backbone_num_classes = 19;
    std::string pretrained_source;  // checkpoint path; empty = random init
    bool freeze_backbone = false;

    void validate() const;
};

struct SsimParams {
    double c1 = 0.01 * 0.01;  // (0.01*L)^2, L=1
    double c2 = 0.03 * 0.03;  // (0.03*L)^2
    int window_size = 11;
    double window_sigma = 1.5;

    void validate() const;
};

enum class OmegaMode {
    Sigma,            // omega values are per-scale Gaussian window sigmas, uniform weights
    WeightNormalized, // omega values are combination weights over a dyadic pyramid
};

std::string to_string(OmegaMode m);
OmegaMode omega_mode_from_string(const std::string& s);

struct MsSsimParams {
    std::vector<double> omega = {0.5, 1.0, 2.0, 4.0, 8.0};
    OmegaMode omega_mode = OmegaMode::Sigma;
    SsimParams ssim;

    int scales() const { return static_cast<int>(omega.size()); }
    void validate() const;
};

struct LossConfig {
    double alpha = 0.84;
    SsimParams ssim;
    MsSsimParams msssim;

    void validate() const;
};

struct OptimizerConfig {
    double lr0 = 0.01;
    bool amsgrad = true;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    void validate() const;
};

struct SchedulerConfig {
    double factor = 0.1;
    int patience = 2;
    int cooldown = 5;
};

struct PreprocessSpec {
    int resize_height = 300;
    int resize_width = 400;
    int crop_height = 192;
    int crop_width = 256;

    int crop_offset_y() const { return (resize_height - crop_height) / 2; }
    int crop_offset_x() const { return (resize_width - crop_width) / 2; }
    void validate() const;
};

struct DataConfig {
    std::string root;
    std::vector<std::string> sets;       // e.g. {"set01", "set07"}
    std::vector<std::string> sequences;  // optional allow-list, e.g. daytime V00x dirs
    uint64_t split_seed = 0;
    double split_ratio = 0.8;
    PreprocessSpec preprocess;
};

struct TrainingConfig {
    int epochs = 120;
    int batch_size = 40;
    uint64_t seed = 0;
    int checkpoint_every = 10;
    std::string snapshot_pair;  // frame id of the pair used for Handle snapshots; empty = none
};

/// Full per-run configuration consumed by the CLI.
struct RunConfig {
    ModelConfig model;
    LossConfig loss;
    OptimizerConfig optimizer;
    SchedulerConfig scheduler;
    DataConfig data;
    TrainingConfig training;
    std::string output_dir = "out";
    std::vector<std::string> variants;  // ablate subcommand only

    void validate() const;
};

void to_json(nlohmann::json& j, const VariantFlags& v);
void from_json(const nlohmann::json& j, VariantFlags& v);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const SsimParams& p);
void from_json(const nlohmann::json& j, SsimParams& p);
void to_json(nlohmann::json& j, const MsSsimParams& p);
void from_json(const nlohmann::json& j, MsSsimParams& p);
void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);
void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);
void to_json(nlohmann::json& j, const SchedulerConfig& c);
void from_json(const nlohmann::json& j, SchedulerConfig& c);
void to_json(nlohmann::json& j, const PreprocessSpec& s);
void from_json(const nlohmann::json& j, PreprocessSpec& s);
void to_json(nlohmann::json& j, const DataConfig& c);
void from_json(const nlohmann::json& j, DataConfig& c);
void to_json(nlohmann::json& j, const TrainingConfig& c);
void from_json(const nlohmann::json& j, TrainingConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Stable 64-bit fingerprint of the model+loss configuration, used to
/// detect checkpoint/config mismatches. Hex string.
std::string config_fingerprint(const ModelConfig& model, const LossConfig& loss);

}  // namespace ladlenet
