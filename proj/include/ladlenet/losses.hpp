#pragma once

#include <torch/torch.h>

#include "ladlenet/config.hpp"

namespace ladlenet {

/// Normalized 2D Gaussian window, shape (1,1,size,size), sums to 1.
torch::Tensor gaussian_window(int size, double sigma,
                              torch::TensorOptions opts = torch::kFloat64);

/// Window side used for a given sigma in sigma-mode multi-scale SSIM.
int window_size_for_sigma(double sigma);

/// Mean absolute difference over batch, channels and pixels.
torch::Tensor l1_loss(const torch::Tensor& fvi, const torch::Tensor& vi);

/// Mean of the local SSIM map over valid window positions, channels averaged.
torch::Tensor ssim(const torch::Tensor& fvi, const torch::Tensor& vi, const SsimParams& p);

/// Multi-scale SSIM. In sigma mode the omega values are per-scale Gaussian
/// window sigmas on the full-resolution images, combined uniformly. In
/// weight-normalized mode the image is repeatedly halved into a dyadic
/// pyramid and per-scale SSIM values are combined with normalized omega
/// weights.
torch::Tensor ms_ssim(const torch::Tensor& fvi, const torch::Tensor& vi, const MsSsimParams& p);

torch::Tensor ms_ssim_loss(const torch::Tensor& fvi, const torch::Tensor& vi,
                           const MsSsimParams& p);

/// alpha * ms_ssim_loss + (1 - alpha) * l1_loss.
torch::Tensor total_loss(const torch::Tensor& fvi, const torch::Tensor& vi,
                         const LossConfig& cfg);

}  // namespace ladlenet
