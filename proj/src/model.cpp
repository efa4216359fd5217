#include "ladlenet/model.hpp"

#include <filesystem>

namespace ladlenet {

namespace {

torch::nn::Conv2d conv3x3(int64_t in, int64_t out) {
    // bias off: every 3x3 conv is followed by batch norm
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1).bias(false));
}

torch::nn::Conv2d conv1x1(int64_t in, int64_t out, bool bias) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1).bias(bias));
}

}  // namespace

ConvBlockImpl::ConvBlockImpl(int64_t in, int64_t mid, int64_t out, bool residual)
    : residual_(residual) {
    const int64_t second_out = residual ? mid : out;
    conv1_ = register_module("conv1", conv3x3(in, mid));
    bn1_ = register_module("bn1", torch::nn::BatchNorm2d(mid));
    conv2_ = register_module("conv2", conv3x3(mid, second_out));
    bn2_ = register_module("bn2", torch::nn::BatchNorm2d(second_out));
    if (residual_) {
        if (in != mid) proj_ = register_module("proj", conv1x1(in, mid, false));
        transform_ = register_module("transform", conv1x1(mid, out, false));
        bn3_ = register_module("bn3", torch::nn::BatchNorm2d(out));
    }
}

torch::Tensor ConvBlockImpl::forward(torch::Tensor x) {
    auto y = torch::relu(bn1_->forward(conv1_->forward(x)));
    y = bn2_->forward(conv2_->forward(y));
    if (residual_) {
        auto shortcut = proj_ ? proj_->forward(x) : x;
        y = torch::relu(y + shortcut);
        y = torch::relu(bn3_->forward(transform_->forward(y)));
    } else {
        y = torch::relu(y);
    }
    return y;
}

UnetImpl::UnetImpl(int64_t in_channels, const std::vector<int64_t>& ch, int64_t code_channels,
                   int64_t out_channels, bool residual_blocks, std::array<int64_t, 4> enc_extra,
                   std::array<int64_t, 4> dec_extra)
    : enc_extra_(enc_extra), dec_extra_(dec_extra) {
    TORCH_CHECK(ch.size() == 4, "channel schedule must have length 4");
    for (int i = 0; i < 4; ++i) {
        const int64_t in = (i == 0 ? in_channels : ch[i - 1]) + enc_extra[i];
        enc_[i] = register_module("enc" + std::to_string(i + 1),
                                  ConvBlock(in, ch[i], ch[i], residual_blocks));
    }
    code1_ = register_module("code1", conv1x1(ch[3], code_channels, false));
    code_bn1_ = register_module("code_bn1", torch::nn::BatchNorm2d(code_channels));
    code2_ = register_module("code2", conv1x1(code_channels, code_channels, false));
    code_bn2_ = register_module("code_bn2", torch::nn::BatchNorm2d(code_channels));
    for (int i = 3; i >= 0; --i) {
        const int64_t from = (i == 3) ? code_channels : ch[i + 1];
        up_[i] = register_module(
            "up" + std::to_string(i + 1),
            torch::nn::ConvTranspose2d(
                torch::nn::ConvTranspose2dOptions(from, ch[i], 2).stride(2).bias(false)));
        dec_[i] = register_module("dec" + std::to_string(i + 1),
                                  ConvBlock(ch[i] * 2 + dec_extra[i], ch[i], ch[i], residual_blocks));
    }
    head_ = register_module("head", conv1x1(ch[0], out_channels, true));
}

UnetFeatures UnetImpl::forward(torch::Tensor x, const std::array<torch::Tensor, 4>& enc_inject,
                               const std::array<torch::Tensor, 4>& dec_inject) {
    UnetFeatures f;
    auto h = x;
    for (int i = 0; i < 4; ++i) {
        TORCH_CHECK(enc_inject[i].defined() == (enc_extra_[i] > 0),
                    "encoder injection does not match construction");
        if (enc_inject[i].defined()) h = torch::cat({h, enc_inject[i]}, 1);
        h = enc_[i]->forward(h);
        f.enc[i] = h;
        h = torch::max_pool2d(h, 2);
    }
    h = torch::relu(code_bn1_->forward(code1_->forward(h)));
    h = torch::relu(code_bn2_->forward(code2_->forward(h)));
    for (int i = 3; i >= 0; --i) {
        TORCH_CHECK(dec_inject[i].defined() == (dec_extra_[i] > 0),
                    "decoder injection does not match construction");
        h = up_[i]->forward(h);
        std::vector<torch::Tensor> parts = {h, f.enc[i]};
        if (dec_inject[i].defined()) parts.push_back(dec_inject[i]);
        h = dec_[i]->forward(torch::cat(parts, 1));
        f.dec[i] = h;
    }
    f.out = torch::sigmoid(head_->forward(h));
    return f;
}

SegBackboneImpl::SegBackboneImpl(int64_t num_classes, const std::string& pretrained_source)
    : num_classes_(num_classes) {
    using namespace torch::nn;
    stem_ = register_module(
        "stem",
        Sequential(Conv2d(Conv2dOptions(3, 64, 3).padding(1).bias(false)), BatchNorm2d(64),
                   ReLU(),
                   Conv2d(Conv2dOptions(64, 64, 3).stride(2).padding(1).bias(false)),
                   BatchNorm2d(64), ReLU(),
                   Conv2d(Conv2dOptions(64, 128, 3).stride(2).padding(1).bias(false)),
                   BatchNorm2d(128), ReLU(),
                   Conv2d(Conv2dOptions(128, 128, 3).padding(2).dilation(2).bias(false)),
                   BatchNorm2d(128), ReLU(),
                   Conv2d(Conv2dOptions(128, 128, 3).padding(4).dilation(4).bias(false)),
                   BatchNorm2d(128), ReLU()));
    classifier_ = register_module("classifier", conv1x1(128, num_classes, true));
    if (!pretrained_source.empty()) {
        if (!std::filesystem::exists(pretrained_source))
            throw ConfigError("backbone weights file missing: " + pretrained_source);
        torch::serialize::InputArchive archive;
        try {
            archive.load_from(pretrained_source);
        } catch (const c10::Error& e) {
            throw ConfigError("backbone weights file corrupt: " + pretrained_source);
        }
        torch::NoGradGuard guard;
        for (auto& p : named_parameters()) {
            torch::Tensor t;
            if (!archive.try_read(p.key(), t))
                throw ConfigError("backbone weights missing tensor: " + p.key());
            p.value().copy_(t);
        }
        for (auto& b : named_buffers()) {
            torch::Tensor t;
            if (archive.try_read(b.key(), t)) b.value().copy_(t);
        }
    }
}

torch::Tensor SegBackboneImpl::forward(torch::Tensor x) {
    auto h = stem_->forward(x);
    h = classifier_->forward(h);
    return torch::nn::functional::interpolate(
        h, torch::nn::functional::InterpolateFuncOptions()
               .size(std::vector<int64_t>{x.size(2), x.size(3)})
               .mode(torch::kBilinear)
               .align_corners(false));
}

LadleNetImpl::LadleNetImpl(const ModelConfig& config) : config_(config) {
    const auto& ch = config.encoder_channels;
    handle_ = register_module(
        "handle", Unet(3, ch, config.code_channels, config.handle_out_channels, true));
    std::array<int64_t, 4> enc_extra{0, 0, 0, 0}, dec_extra{0, 0, 0, 0};
    if (config.variant.cross_concat) {
        for (int i = 0; i < 4; ++i) {
            enc_extra[i] = ch[i];
            concat_link_[i] = register_module("concat_link" + std::to_string(i + 1),
                                              conv1x1(ch[i], ch[i], true));
        }
    }
    if (config.variant.cross_skip) {
        for (int i = 0; i < 4; ++i) {
            dec_extra[i] = ch[i];
            skip_link_[i] = register_module("skip_link" + std::to_string(i + 1),
                                            conv1x1(ch[i], ch[i], true));
        }
    }
    bowl_ = register_module("bowl", Unet(config.handle_out_channels, ch, config.code_channels,
                                         config.bowl_out_channels, true, enc_extra, dec_extra));
}

std::pair<torch::Tensor, torch::Tensor> LadleNetImpl::forward_pair(torch::Tensor x) {
    auto hf = handle_->forward(x);
    std::array<torch::Tensor, 4> enc_inject{}, dec_inject{};
    if (config_.variant.cross_concat)
        for (int i = 0; i < 4; ++i) enc_inject[i] = concat_link_[i]->forward(hf.dec[i]);
    if (config_.variant.cross_skip)
        for (int i = 0; i < 4; ++i) dec_inject[i] = skip_link_[i]->forward(hf.enc[i]);
    auto bf = bowl_->forward(hf.out, enc_inject, dec_inject);
    return {bf.out, hf.out};
}

BridgedUnetImpl::BridgedUnetImpl(const ModelConfig& config) {
    const auto& ch = config.encoder_channels;
    handle_ = register_module(
        "handle", Unet(3, ch, config.code_channels, config.handle_out_channels, false));
    bowl_ = register_module("bowl", Unet(config.handle_out_channels + 3, ch,
                                         config.code_channels, config.bowl_out_channels, false));
}

std::pair<torch::Tensor, torch::Tensor> BridgedUnetImpl::forward_pair(torch::Tensor x) {
    auto hf = handle_->forward(x);
    auto bf = bowl_->forward(torch::cat({hf.out, x}, 1));
    return {bf.out, hf.out};
}

LadleNetPlusImpl::LadleNetPlusImpl(const ModelConfig& config) {
    backbone_ = register_module(
        "backbone", SegBackbone(config.backbone_num_classes, config.pretrained_source));
    if (config.freeze_backbone)
        for (auto& p : backbone_->parameters()) p.set_requires_grad(false);
    bowl_ = register_module("bowl",
                            Unet(config.backbone_num_classes, config.encoder_channels,
                                 config.code_channels, config.bowl_out_channels, true));
}

std::pair<torch::Tensor, torch::Tensor> LadleNetPlusImpl::forward_pair(torch::Tensor x) {
    auto scores = backbone_->forward(x);
    auto bf = bowl_->forward(scores);
    // parameter-free 3-channel view of the class map: softmax probabilities
    // summed over three contiguous class groups
    auto probs = torch::softmax(scores, 1);
    auto groups = torch::tensor_split(probs, 3, 1);
    auto handle_out = torch::cat({groups[0].sum(1, true), groups[1].sum(1, true),
                                  groups[2].sum(1, true)},
                                 1)
                          .clamp(0, 1);
    return {bf.out, handle_out};
}

void check_input(const torch::Tensor& x) {
    if (x.dim() != 4) throw ConfigError("forward: input must be rank-4 (B,C,H,W)");
    if (x.size(1) != 3) throw ConfigError("forward: input channel count must be 3");
    if (x.size(2) % 16 != 0 || x.size(3) % 16 != 0)
        throw ConfigError("forward: H and W must be divisible by 16");
}

std::pair<torch::Tensor, torch::Tensor> NetworkAssembly::forward(const torch::Tensor& x) const {
    check_input(x);
    return model->forward_pair(x);
}

NetworkAssembly build_ladlenet(const ModelConfig& config, uint64_t seed) {
    config.validate();
    torch::manual_seed(seed);
    std::shared_ptr<TranslationModelImpl> model;
    switch (config.variant.backbone) {
        case Backbone::BuiltinUnet:
            model = std::make_shared<LadleNetImpl>(config);
            break;
        case Backbone::BridgedUnet:
            model = std::make_shared<BridgedUnetImpl>(config);
            break;
        case Backbone::SegmentationBackbone:
            model = std::make_shared<LadleNetPlusImpl>(config);
            break;
    }
    return NetworkAssembly{std::move(model), config, seed};
}

NetworkAssembly build_bridged_unet(ModelConfig config, uint64_t seed) {
    config.variant = VariantFlags{false, false, Backbone::BridgedUnet};
    return build_ladlenet(config, seed);
}

int64_t count_parameters(const NetworkAssembly& assembly) {
    int64_t n = 0;
    for (const auto& p : assembly.model->parameters())
        if (p.requires_grad()) n += p.numel();
    return n;
}

}  // namespace ladlenet
