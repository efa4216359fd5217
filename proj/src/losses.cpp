#include "ladlenet/losses.hpp"

#include <cmath>

namespace ladlenet {

namespace {

void check_pair(const torch::Tensor& a, const torch::Tensor& b) {
    if (a.sizes() != b.sizes())
        throw std::invalid_argument("loss: image shapes must match");
    if (a.dim() != 4) throw std::invalid_argument("loss: images must be rank-4 (B,C,H,W)");
}

/// Windowed local statistics SSIM, valid positions only (no padding).
torch::Tensor ssim_with_window(const torch::Tensor& x, const torch::Tensor& y,
                               const torch::Tensor& window, double c1, double c2) {
    const int64_t side = window.size(2);
    if (x.size(2) < side || x.size(3) < side)
        throw std::invalid_argument("ssim: image smaller than window");
    const int64_t c = x.size(1);
    auto w = window.to(x.dtype()).expand({c, 1, side, side});
    namespace F = torch::nn::functional;
    auto opts = F::Conv2dFuncOptions().groups(c);
    auto mu_x = F::conv2d(x, w, opts);
    auto mu_y = F::conv2d(y, w, opts);
    auto mu_xx = mu_x * mu_x;
    auto mu_yy = mu_y * mu_y;
    auto mu_xy = mu_x * mu_y;
    auto sigma_xx = F::conv2d(x * x, w, opts) - mu_xx;
    auto sigma_yy = F::conv2d(y * y, w, opts) - mu_yy;
    auto sigma_xy = F::conv2d(x * y, w, opts) - mu_xy;
    auto num = (2 * mu_xy + c1) * (2 * sigma_xy + c2);
    auto den = (mu_xx + mu_yy + c1) * (sigma_xx + sigma_yy + c2);
    return (num / den).mean();
}

}  // namespace

torch::Tensor gaussian_window(int size, double sigma, torch::TensorOptions opts) {
    auto coords = torch::arange(size, opts) - (size - 1) / 2.0;
    auto g = torch::exp(-(coords * coords) / (2.0 * sigma * sigma));
    g = g / g.sum();
    auto w = torch::outer(g, g);
    return (w / w.sum()).reshape({1, 1, size, size});
}

int window_size_for_sigma(double sigma) {
    return 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
}

torch::Tensor l1_loss(const torch::Tensor& fvi, const torch::Tensor& vi) {
    check_pair(fvi, vi);
    return (fvi - vi).abs().mean();
}

torch::Tensor ssim(const torch::Tensor& fvi, const torch::Tensor& vi, const SsimParams& p) {
    check_pair(fvi, vi);
    p.validate();
    auto window = gaussian_window(p.window_size, p.window_sigma, fvi.options());
    return ssim_with_window(fvi, vi, window, p.c1, p.c2);
}

torch::Tensor ms_ssim(const torch::Tensor& fvi, const torch::Tensor& vi, const MsSsimParams& p) {
    check_pair(fvi, vi);
    p.validate();
    const auto& ss = p.ssim;
    if (p.omega_mode == OmegaMode::Sigma) {
        torch::Tensor acc;
        for (double sigma : p.omega) {
            const int side = window_size_for_sigma(sigma);
            auto window = gaussian_window(side, sigma, fvi.options());
            auto s = ssim_with_window(fvi, vi, window, ss.c1, ss.c2);
            acc = acc.defined() ? acc + s : s;
        }
        return acc / static_cast<double>(p.omega.size());
    }
    // weight-normalized: dyadic pyramid, fixed window, normalized weights
    double wsum = 0;
    for (double w : p.omega) wsum += w;
    auto window = gaussian_window(ss.window_size, ss.window_sigma, fvi.options());
    auto x = fvi, y = vi;
    torch::Tensor acc;
    for (size_t s = 0; s < p.omega.size(); ++s) {
        if (s > 0) {
            x = torch::avg_pool2d(x, 2);
            y = torch::avg_pool2d(y, 2);
        }
        if (x.size(2) < ss.window_size || x.size(3) < ss.window_size)
            throw std::invalid_argument("ms_ssim: image too small for requested scale count");
        auto v = (p.omega[s] / wsum) * ssim_with_window(x, y, window, ss.c1, ss.c2);
        acc = acc.defined() ? acc + v : v;
    }
    return acc;
}

torch::Tensor ms_ssim_loss(const torch::Tensor& fvi, const torch::Tensor& vi,
                           const MsSsimParams& p) {
    return 1.0 - ms_ssim(fvi, vi, p);
}

torch::Tensor total_loss(const torch::Tensor& fvi, const torch::Tensor& vi,
                         const LossConfig& cfg) {
    cfg.validate();
    return cfg.alpha * ms_ssim_loss(fvi, vi, cfg.msssim) +
           (1.0 - cfg.alpha) * ladlenet::l1_loss(fvi, vi);
}

}  // namespace ladlenet
