#pragma once

#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "ladlenet/config.hpp"
#include "ladlenet/data.hpp"
#include "ladlenet/model.hpp"

namespace ladlenet {

/// Peak signal-to-noise ratio in dB with MAX=1; +infinity on identical images.
double psnr(const torch::Tensor& fvi, const torch::Tensor& vi);

/// Mean squared difference over all elements.
double mse(const torch::Tensor& fvi, const torch::Tensor& vi);

/// Average gradient: mean over valid pixels of sqrt((dx^2 + dy^2)/2) using
/// forward differences, averaged over channels. Accepts (C,H,W) or (1,C,H,W).
double avg_gradient(const torch::Tensor& img);

struct VifParams {
    int scales = 4;
    double sigma_nsq = 2.0;  // standard pixel-domain value on a [0,255] scale
};

/// Pixel-domain visual information fidelity, per channel then averaged.
/// Images in [0,1] are brought to the [0,255] scale internally so sigma_nsq
/// keeps its conventional meaning.
double vif(const torch::Tensor& fvi, const torch::Tensor& vi, const VifParams& p = {});

/// Pearson correlation over all elements of the flattened 3-channel data.
/// Throws on constant input (undefined correlation).
double cc(const torch::Tensor& fvi, const torch::Tensor& vi);

/// Metric row names, in report column order.
inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names = {"SSIM", "MS-SSIM", "L1", "PSNR",
                                                   "AG",   "MSE",     "VIF", "CC"};
    return names;
}

struct PairMetrics {
    std::string frame_id;
    double ssim = 0, ms_ssim = 0, l1 = 0, psnr = 0, ag = 0, mse = 0, vif = 0, cc = 0;

    std::vector<double> values() const { return {ssim, ms_ssim, l1, psnr, ag, mse, vif, cc}; }
};

struct MetricReport {
    std::vector<PairMetrics> rows;
    PairMetrics means;

    size_t pair_count() const { return rows.size(); }
    void write_csv(const std::string& path) const;
    nlohmann::json summary_json() const;
    std::string render_table() const;
};

/// Computes all eight metrics for one (fvi, vi) pair of (1,3,H,W) or (3,H,W)
/// tensors.
PairMetrics compute_pair_metrics(const torch::Tensor& fvi, const torch::Tensor& vi,
                                 const SsimParams& ssim_params = {},
                                 const MsSsimParams& msssim_params = {});

/// Runs the model over every pair in the manifest (restricted to a split if
/// given) and aggregates per-pair metrics into dataset means. A null model
/// is the identity bypass: the ground-truth vi is scored against itself.
MetricReport evaluate_pairs(const DatasetManifest& manifest, NetworkAssembly& model,
                            const PreprocessSpec& spec,
                            std::optional<Split> split = std::nullopt,
                            const SsimParams& ssim_params = {},
                            const MsSsimParams& msssim_params = {});

}  // namespace ladlenet
