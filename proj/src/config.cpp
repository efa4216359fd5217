#include "ladlenet/config.hpp"

namespace ladlenet {

void TensorSpec::validate() const {
    if (batch < 1 || channels < 1 || height < 1 || width < 1)
        throw ConfigError("TensorSpec: all dims must be >= 1");
    if (height % 16 != 0 || width % 16 != 0)
        throw ConfigError("TensorSpec: height and width must be divisible by 16");
}

std::string to_string(Backbone b) {
    switch (b) {
        case Backbone::BuiltinUnet: return "builtin-unet";
        case Backbone::BridgedUnet: return "bridged-unet";
        case Backbone::SegmentationBackbone: return "deeplabv3plus-cityscapes";
    }
    throw ConfigError("unknown backbone enum value");
}

Backbone backbone_from_string(const std::string& s) {
    if (s == "builtin-unet") return Backbone::BuiltinUnet;
    if (s == "bridged-unet") return Backbone::BridgedUnet;
    if (s == "deeplabv3plus-cityscapes") return Backbone::SegmentationBackbone;
    throw ConfigError("unknown backbone identifier: " + s);
}

void VariantFlags::validate() const {
    if (backbone == Backbone::SegmentationBackbone && (cross_concat || cross_skip))
        throw ConfigError(
            "VariantFlags: segmentation-backbone forces cross_concat=false and cross_skip=false");
}

void ModelConfig::validate() const {
    variant.validate();
    if (encoder_channels.size() != 4)
        throw ConfigError("ModelConfig: encoder_channels schedule must have length 4");
    for (auto c : encoder_channels)
        if (c < 1) throw ConfigError("ModelConfig: encoder channels must be >= 1");
    if (code_channels < 1) throw ConfigError("ModelConfig: code_channels must be >= 1");
    if (handle_out_channels != 3 || bowl_out_channels != 3)
        throw ConfigError("ModelConfig: handle and bowl outputs must have 3 channels");
    if (backbone_num_classes < 1)
        throw ConfigError("ModelConfig: backbone_num_classes must be >= 1");
}

void SsimParams::validate() const {
    if (c1 <= 0 || c2 <= 0) throw ConfigError("SsimParams: C1 and C2 must be > 0");
    if (window_size < 1 || window_size % 2 == 0)
        throw ConfigError("SsimParams: window size must be odd and >= 1");
    if (window_sigma <= 0) throw ConfigError("SsimParams: window sigma must be > 0");
}

std::string to_string(OmegaMode m) {
    return m == OmegaMode::Sigma ? "sigma" : "weight-normalized";
}

OmegaMode omega_mode_from_string(const std::string& s) {
    if (s == "sigma") return OmegaMode::Sigma;
    if (s == "weight-normalized") return OmegaMode::WeightNormalized;
    throw ConfigError("unknown omega_mode: " + s);
}

void MsSsimParams::validate() const {
    if (omega.empty()) throw ConfigError("MsSsimParams: omega must be non-empty");
    for (auto w : omega)
        if (w <= 0) throw ConfigError("MsSsimParams: omega entries must be > 0");
    ssim.validate();
}

void LossConfig::validate() const {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("LossConfig: alpha must be in [0,1]");
    ssim.validate();
    msssim.validate();
}

void OptimizerConfig::validate() const {
    if (lr0 <= 0) throw ConfigError("OptimizerConfig: lr0 must be > 0");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
        throw ConfigError("OptimizerConfig: betas must be in [0,1)");
}

void PreprocessSpec::validate() const {
    if (resize_height < 1 || resize_width < 1)
        throw ConfigError("PreprocessSpec: resize dims must be >= 1");
    if (crop_height > resize_height || crop_width > resize_width)
        throw ConfigError("PreprocessSpec: crop must fit inside resize dims");
}

void RunConfig::validate() const {
    model.validate();
    loss.validate();
    optimizer.validate();
    data.preprocess.validate();
    if (data.split_ratio <= 0.0 || data.split_ratio >= 1.0)
        throw ConfigError("RunConfig: split_ratio must be in (0,1)");
    if (training.epochs < 0) throw ConfigError("RunConfig: epochs must be >= 0");
    if (training.batch_size < 1) throw ConfigError("RunConfig: batch_size must be >= 1");
}

using nlohmann::json;

void to_json(json& j, const VariantFlags& v) {
    j = json{{"cross_concat", v.cross_concat},
             {"cross_skip", v.cross_skip},
             {"backbone", to_string(v.backbone)}};
}

void from_json(const json& j, VariantFlags& v) {
    v.cross_concat = j.value("cross_concat", v.cross_concat);
    v.cross_skip = j.value("cross_skip", v.cross_skip);
    if (j.contains("backbone")) v.backbone = backbone_from_string(j.at("backbone"));
}

void to_json(json& j, const ModelConfig& c) {
    j = json{{"variant", c.variant},
             {"encoder_channels", c.encoder_channels},
             {"code_channels", c.code_channels},
             {"handle_out_channels", c.handle_out_channels},
             {"bowl_out_channels", c.bowl_out_channels},
             {"backbone_num_classes", c.backbone_num_classes},
             {"pretrained_source", c.pretrained_source},
             {"freeze_backbone", c.freeze_backbone}};
}

void from_json(const json& j, ModelConfig& c) {
    if (j.contains("variant")) c.variant = j.at("variant").get<VariantFlags>();
    c.encoder_channels = j.value("encoder_channels", c.encoder_channels);
    c.code_channels = j.value("code_channels", c.code_channels);
    c.handle_out_channels = j.value("handle_out_channels", c.handle_out_channels);
    c.bowl_out_channels = j.value("bowl_out_channels", c.bowl_out_channels);
    c.backbone_num_classes = j.value("backbone_num_classes", c.backbone_num_classes);
    c.pretrained_source = j.value("pretrained_source", c.pretrained_source);
    c.freeze_backbone = j.value("freeze_backbone", c.freeze_backbone);
}

void to_json(json& j, const SsimParams& p) {
    j = json{{"c1", p.c1}, {"c2", p.c2}, {"window_size", p.window_size},
             {"window_sigma", p.window_sigma}};
}

void from_json(const json& j, SsimParams& p) {
    p.c1 = j.value("c1", p.c1);
    p.c2 = j.value("c2", p.c2);
    p.window_size = j.value("window_size", p.window_size);
    p.window_sigma = j.value("window_sigma", p.window_sigma);
}

void to_json(json& j, const MsSsimParams& p) {
    j = json{{"omega", p.omega}, {"omega_mode", to_string(p.omega_mode)}, {"ssim", p.ssim}};
}

void from_json(const json& j, MsSsimParams& p) {
    p.omega = j.value("omega", p.omega);
    if (j.contains("omega_mode")) p.omega_mode = omega_mode_from_string(j.at("omega_mode"));
    if (j.contains("ssim")) p.ssim = j.at("ssim").get<SsimParams>();
}

void to_json(json& j, const LossConfig& c) {
    j = json{{"alpha", c.alpha}, {"ssim", c.ssim}, {"msssim", c.msssim}};
}

void from_json(const json& j, LossConfig& c) {
    c.alpha = j.value("alpha", c.alpha);
    if (j.contains("ssim")) c.ssim = j.at("ssim").get<SsimParams>();
    if (j.contains("msssim")) c.msssim = j.at("msssim").get<MsSsimParams>();
}

void to_json(json& j, const OptimizerConfig& c) {
    j = json{{"lr0", c.lr0}, {"amsgrad", c.amsgrad}, {"beta1", c.beta1},
             {"beta2", c.beta2}, {"eps", c.eps}, {"weight_decay", c.weight_decay}};
}

void from_json(const json& j, OptimizerConfig& c) {
    c.lr0 = j.value("lr0", c.lr0);
    c.amsgrad = j.value("amsgrad", c.amsgrad);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
}

void to_json(json& j, const SchedulerConfig& c) {
    j = json{{"factor", c.factor}, {"patience", c.patience}, {"cooldown", c.cooldown}};
}

void from_json(const json& j, SchedulerConfig& c) {
    c.factor = j.value("factor", c.factor);
    c.patience = j.value("patience", c.patience);
    c.cooldown = j.value("cooldown", c.cooldown);
}

void to_json(json& j, const PreprocessSpec& s) {
    j = json{{"resize_height", s.resize_height}, {"resize_width", s.resize_width},
             {"crop_height", s.crop_height}, {"crop_width", s.crop_width}};
}

void from_json(const json& j, PreprocessSpec& s) {
    s.resize_height = j.value("resize_height", s.resize_height);
    s.resize_width = j.value("resize_width", s.resize_width);
    s.crop_height = j.value("crop_height", s.crop_height);
    s.crop_width = j.value("crop_width", s.crop_width);
}

void to_json(json& j, const DataConfig& c) {
    j = json{{"root", c.root}, {"sets", c.sets}, {"sequences", c.sequences},
             {"split_seed", c.split_seed}, {"split_ratio", c.split_ratio},
             {"preprocess", c.preprocess}};
}

void from_json(const json& j, DataConfig& c) {
    c.root = j.value("root", c.root);
    c.sets = j.value("sets", c.sets);
    c.sequences = j.value("sequences", c.sequences);
    c.split_seed = j.value("split_seed", c.split_seed);
    c.split_ratio = j.value("split_ratio", c.split_ratio);
    if (j.contains("preprocess")) c.preprocess = j.at("preprocess").get<PreprocessSpec>();
}

void to_json(json& j, const TrainingConfig& c) {
    j = json{{"epochs", c.epochs}, {"batch_size", c.batch_size}, {"seed", c.seed},
             {"checkpoint_every", c.checkpoint_every}, {"snapshot_pair", c.snapshot_pair}};
}

void from_json(const json& j, TrainingConfig& c) {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.snapshot_pair = j.value("snapshot_pair", c.snapshot_pair);
}

void to_json(json& j, const RunConfig& c) {
    j = json{{"model", c.model}, {"loss", c.loss}, {"optimizer", c.optimizer},
             {"scheduler", c.scheduler}, {"data", c.data}, {"training", c.training},
             {"output_dir", c.output_dir}, {"variants", c.variants}};
}

void from_json(const json& j, RunConfig& c) {
    if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
    if (j.contains("loss")) c.loss = j.at("loss").get<LossConfig>();
    if (j.contains("optimizer")) c.optimizer = j.at("optimizer").get<OptimizerConfig>();
    if (j.contains("scheduler")) c.scheduler = j.at("scheduler").get<SchedulerConfig>();
    if (j.contains("data")) c.data = j.at("data").get<DataConfig>();
    if (j.contains("training")) c.training = j.at("training").get<TrainingConfig>();
    c.output_dir = j.value("output_dir", c.output_dir);
    c.variants = j.value("variants", c.variants);
}

std::string config_fingerprint(const ModelConfig& model, const LossConfig& loss) {
    json j{{"model", model}, {"loss", loss}};
    const std::string s = j.dump();
    // FNV-1a 64
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace ladlenet
