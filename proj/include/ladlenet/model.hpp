#pragma once

#include <array>
#include <memory>
#include <utility>

#include <torch/torch.h>

#include "ladlenet/config.hpp"

namespace ladlenet {

/// Two 3x3 convolutions at mid width. In residual form the block input is
/// added onto the second conv's output (1x1 projection when widths differ)
/// and a 1x1 transform maps mid -> out after the add. In plain form the
/// block is conv(in->mid), conv(mid->out) with no add and no transform.
class ConvBlockImpl : public torch::nn::Module {
public:
    ConvBlockImpl(int64_t in, int64_t mid, int64_t out, bool residual = true);
    torch::Tensor forward(torch::Tensor x);

private:
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
    torch::nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr};
    torch::nn::Conv2d proj_{nullptr};       // residual path, in != mid only
    torch::nn::Conv2d transform_{nullptr};  // 1x1 mid -> out, residual form only
    torch::nn::BatchNorm2d bn3_{nullptr};
    bool residual_;
};
TORCH_MODULE(ConvBlock);

struct UnetFeatures {
    torch::Tensor out;                  // full-resolution head output in [0,1]
    std::array<torch::Tensor, 4> enc;   // encoder block outputs, level 0 = full res
    std::array<torch::Tensor, 4> dec;   // decoder block outputs, level 0 = full res
};

/// 5-level U-net: four encoder blocks with max-pool halving, a code of two
/// 1x1 convolutions, four decoder levels with transposed-conv upsampling and
/// encoder-skip aggregation, and a 1x1 head squashed to [0,1].
class UnetImpl : public torch::nn::Module {
public:
    UnetImpl(int64_t in_channels, const std::vector<int64_t>& channels, int64_t code_channels,
             int64_t out_channels, bool residual_blocks,
             std::array<int64_t, 4> enc_extra = {0, 0, 0, 0},
             std::array<int64_t, 4> dec_extra = {0, 0, 0, 0});

    /// enc_inject[i] / dec_inject[i] are concatenated into the level-i encoder
    /// input / decoder aggregation; undefined tensors mean no injection and
    /// require the corresponding extra-channel count to be zero.
    UnetFeatures forward(torch::Tensor x,
                         const std::array<torch::Tensor, 4>& enc_inject = {},
                         const std::array<torch::Tensor, 4>& dec_inject = {});

private:
    std::array<ConvBlock, 4> enc_{nullptr, nullptr, nullptr, nullptr};
    torch::nn::Conv2d code1_{nullptr}, code2_{nullptr};
    torch::nn::BatchNorm2d code_bn1_{nullptr}, code_bn2_{nullptr};
    std::array<torch::nn::ConvTranspose2d, 4> up_{nullptr, nullptr, nullptr, nullptr};
    std::array<ConvBlock, 4> dec_{nullptr, nullptr, nullptr, nullptr};
    torch::nn::Conv2d head_{nullptr};
    std::array<int64_t, 4> enc_extra_, dec_extra_;
};
TORCH_MODULE(Unet);

/// Per-pixel class-score map at full input resolution.
class SemanticBackboneImpl : public torch::nn::Module {
public:
    virtual ~SemanticBackboneImpl() = default;
    virtual torch::Tensor forward(torch::Tensor x) = 0;
    virtual int64_t num_classes() const = 0;
};

/// Dilated fully-convolutional segmentation head standing behind the
/// "deeplabv3plus-cityscapes" identifier. Weights are consumed from a
/// checkpoint file; training the backbone from scratch is out of scope.
class SegBackboneImpl : public SemanticBackboneImpl {
public:
    SegBackboneImpl(int64_t num_classes, const std::string& pretrained_source);
    torch::Tensor forward(torch::Tensor x) override;
    int64_t num_classes() const override { return num_classes_; }

private:
    torch::nn::Sequential stem_{nullptr};
    torch::nn::Conv2d classifier_{nullptr};
    int64_t num_classes_;
};
TORCH_MODULE(SegBackbone);

class TranslationModelImpl : public torch::nn::Module {
public:
    virtual ~TranslationModelImpl() = default;
    /// Returns (fvi, handle_out), both (B,3,H,W) in [0,1].
    virtual std::pair<torch::Tensor, torch::Tensor> forward_pair(torch::Tensor x) = 0;
};

/// Handle U-net chained into a Bowl U-net, with optional cross-module links:
/// cross-concat feeds Handle decoder features into Bowl encoder levels,
/// cross-skip feeds Handle encoder features into Bowl decoder aggregation.
/// Each link projects through a 1x1 convolution before concatenation.
class LadleNetImpl : public TranslationModelImpl {
public:
    explicit LadleNetImpl(const ModelConfig& config);
    std::pair<torch::Tensor, torch::Tensor> forward_pair(torch::Tensor x) override;

private:
    Unet handle_{nullptr};
    Unet bowl_{nullptr};
    std::array<torch::nn::Conv2d, 4> concat_link_{nullptr, nullptr, nullptr, nullptr};
    std::array<torch::nn::Conv2d, 4> skip_link_{nullptr, nullptr, nullptr, nullptr};
    ModelConfig config_;
};
TORCH_MODULE(LadleNet);

/// Two U-nets chained through the original concatenation bridge: the first
/// net's image output is concatenated with the raw input before the second
/// net. Plain (non-residual) conv blocks, no cross-module links.
class BridgedUnetImpl : public TranslationModelImpl {
public:
    explicit BridgedUnetImpl(const ModelConfig& config);
    std::pair<torch::Tensor, torch::Tensor> forward_pair(torch::Tensor x) override;

private:
    Unet handle_{nullptr};
    Unet bowl_{nullptr};
};
TORCH_MODULE(BridgedUnet);

/// Segmentation backbone in place of the Handle U-net; the class-score map
/// feeds the Bowl directly and the cross-module links are discarded.
class LadleNetPlusImpl : public TranslationModelImpl {
public:
    explicit LadleNetPlusImpl(const ModelConfig& config);
    std::pair<torch::Tensor, torch::Tensor> forward_pair(torch::Tensor x) override;

private:
    SegBackbone backbone_{nullptr};
    Unet bowl_{nullptr};
};
TORCH_MODULE(LadleNetPlus);

/// A built network plus the config it was built from.
struct NetworkAssembly {
    std::shared_ptr<TranslationModelImpl> model;
    ModelConfig config;
    uint64_t seed = 0;

    std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x) const;
    void train(bool on = true) { model->train(on); }
    void eval() { model->train(false); }
};

/// Validates an input batch against the forward contract.
void check_input(const torch::Tensor& x);

NetworkAssembly build_ladlenet(const ModelConfig& config, uint64_t seed = 0);
NetworkAssembly build_bridged_unet(ModelConfig config, uint64_t seed = 0);

/// Exact count of trainable scalars.
int64_t count_parameters(const NetworkAssembly& assembly);

}  // namespace ladlenet
