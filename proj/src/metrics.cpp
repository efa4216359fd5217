#include "ladlenet/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "ladlenet/losses.hpp"

namespace ladlenet {

namespace {

void check_pair(const torch::Tensor& a, const torch::Tensor& b) {
    if (a.sizes() != b.sizes()) throw std::invalid_argument("metric: image shapes must match");
}

torch::Tensor as_batched(const torch::Tensor& t) {
    if (t.dim() == 3) return t.unsqueeze(0);
    if (t.dim() == 4) return t;
    throw std::invalid_argument("metric: expected (C,H,W) or (B,C,H,W)");
}

}  // namespace

double mse(const torch::Tensor& fvi, const torch::Tensor& vi) {
    check_pair(fvi, vi);
    return (fvi - vi).to(torch::kFloat64).pow(2).mean().item<double>();
}

double psnr(const torch::Tensor& fvi, const torch::Tensor& vi) {
    const double m = mse(fvi, vi);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

double avg_gradient(const torch::Tensor& img) {
    auto x = as_batched(img).to(torch::kFloat64);
    const int64_t h = x.size(2), w = x.size(3);
    if (h < 2 || w < 2) throw std::invalid_argument("avg_gradient: H and W must be >= 2");
    auto dx = x.narrow(3, 1, w - 1).narrow(2, 0, h - 1) - x.narrow(3, 0, w - 1).narrow(2, 0, h - 1);
    auto dy = x.narrow(2, 1, h - 1).narrow(3, 0, w - 1) - x.narrow(2, 0, h - 1).narrow(3, 0, w - 1);
    return torch::sqrt((dx * dx + dy * dy) / 2.0).mean().item<double>();
}

double cc(const torch::Tensor& fvi, const torch::Tensor& vi) {
    check_pair(fvi, vi);
    auto a = fvi.flatten().to(torch::kFloat64);
    auto b = vi.flatten().to(torch::kFloat64);
    auto ac = a - a.mean();
    auto bc = b - b.mean();
    const double va = ac.pow(2).sum().item<double>();
    const double vb = bc.pow(2).sum().item<double>();
    const bool a_const = a.max().item<double>() == a.min().item<double>();
    const bool b_const = b.max().item<double>() == b.min().item<double>();
    if (a_const || b_const || va == 0.0 || vb == 0.0)
        throw std::invalid_argument("cc: undefined correlation for constant input");
    return (ac * bc).sum().item<double>() / std::sqrt(va * vb);
}

namespace {

// valid-mode 2D gaussian filtering on a (H,W) float64 tensor
torch::Tensor filter_valid(const torch::Tensor& x, const torch::Tensor& win) {
    namespace F = torch::nn::functional;
    return F::conv2d(x.unsqueeze(0).unsqueeze(0), win.unsqueeze(0).unsqueeze(0),
                     F::Conv2dFuncOptions())
        .squeeze(0)
        .squeeze(0);
}

torch::Tensor gauss2d(int n, double sigma) {
    return gaussian_window(n, sigma, torch::kFloat64).reshape({n, n});
}

// single-channel pixel-domain VIF accumulation
void vif_channel(torch::Tensor ref, torch::Tensor dist, const VifParams& p, double& num,
                 double& den) {
    constexpr double eps = 1e-10;
    for (int scale = 1; scale <= p.scales; ++scale) {
        const int n = (1 << (p.scales - scale + 1)) + 1;
        auto win = gauss2d(n, n / 5.0);
        if (scale > 1) {
            ref = filter_valid(ref, win).index({torch::indexing::Slice(0, torch::indexing::None, 2),
                                                torch::indexing::Slice(0, torch::indexing::None, 2)});
            dist = filter_valid(dist, win).index(
                {torch::indexing::Slice(0, torch::indexing::None, 2),
                 torch::indexing::Slice(0, torch::indexing::None, 2)});
        }
        if (ref.size(0) < n || ref.size(1) < n)
            throw std::invalid_argument("vif: image too small for scale count");
        auto mu1 = filter_valid(ref, win);
        auto mu2 = filter_valid(dist, win);
        auto mu1_sq = mu1 * mu1, mu2_sq = mu2 * mu2, mu1_mu2 = mu1 * mu2;
        auto sigma1_sq = (filter_valid(ref * ref, win) - mu1_sq).clamp_min(0);
        auto sigma2_sq = (filter_valid(dist * dist, win) - mu2_sq).clamp_min(0);
        auto sigma12 = filter_valid(ref * dist, win) - mu1_mu2;

        auto g = sigma12 / (sigma1_sq + eps);
        auto sv_sq = sigma2_sq - g * sigma12;

        auto small1 = sigma1_sq < eps;
        g = torch::where(small1, torch::zeros_like(g), g);
        sv_sq = torch::where(small1, sigma2_sq, sv_sq);
        auto s1 = torch::where(small1, torch::zeros_like(sigma1_sq), sigma1_sq);

        auto small2 = sigma2_sq < eps;
        g = torch::where(small2, torch::zeros_like(g), g);
        sv_sq = torch::where(small2, torch::zeros_like(sv_sq), sv_sq);

        auto neg = g < 0;
        sv_sq = torch::where(neg, sigma2_sq, sv_sq);
        g = torch::where(neg, torch::zeros_like(g), g);
        sv_sq = sv_sq.clamp_min(eps);

        num += torch::log10(1.0 + g * g * s1 / (sv_sq + p.sigma_nsq)).sum().item<double>();
        den += torch::log10(1.0 + s1 / p.sigma_nsq).sum().item<double>();
    }
}

}  // namespace

double vif(const torch::Tensor& fvi, const torch::Tensor& vi, const VifParams& p) {
    check_pair(fvi, vi);
    auto dist = as_batched(fvi).to(torch::kFloat64) * 255.0;
    auto ref = as_batched(vi).to(torch::kFloat64) * 255.0;
    double num = 0, den = 0;
    for (int64_t b = 0; b < ref.size(0); ++b)
        for (int64_t c = 0; c < ref.size(1); ++c)
            vif_channel(ref[b][c], dist[b][c], p, num, den);
    if (den == 0.0) return 1.0;  // zero-information reference
    return num / den;
}

PairMetrics compute_pair_metrics(const torch::Tensor& fvi_in, const torch::Tensor& vi_in,
                                 const SsimParams& ssim_params,
                                 const MsSsimParams& msssim_params) {
    auto fvi = as_batched(fvi_in).to(torch::kFloat64);
    auto vi = as_batched(vi_in).to(torch::kFloat64);
    PairMetrics m;
    m.ssim = ssim(fvi, vi, ssim_params).item<double>();
    m.ms_ssim = ms_ssim(fvi, vi, msssim_params).item<double>();
    m.l1 = ladlenet::l1_loss(fvi, vi).item<double>();
    m.psnr = psnr(fvi, vi);
    m.ag = avg_gradient(fvi);
    m.mse = mse(fvi, vi);
    m.vif = vif(fvi, vi);
    m.cc = cc(fvi, vi);
    return m;
}

MetricReport evaluate_pairs(const DatasetManifest& manifest, NetworkAssembly& model,
                            const PreprocessSpec& spec, std::optional<Split> split,
                            const SsimParams& ssim_params, const MsSsimParams& msssim_params) {
    std::vector<size_t> idx;
    if (split) {
        idx = manifest.indices(*split);
    } else {
        idx.resize(manifest.pairs.size());
        std::iota(idx.begin(), idx.end(), 0);
    }
    if (idx.empty()) throw DataError("evaluate_pairs: no pairs to evaluate");

    if (model.model) model.eval();
    torch::NoGradGuard guard;
    MetricReport report;
    std::vector<double> sums(8, 0.0);
    for (size_t i : idx) {
        auto [tir, vi] = preprocess(manifest.pairs[i], spec);
        torch::Tensor fvi;
        if (model.model) {
            fvi = model.forward(tir.unsqueeze(0)).first.squeeze(0);
        } else {
            fvi = vi;  // identity bypass
        }
        auto m = compute_pair_metrics(fvi, vi, ssim_params, msssim_params);
        m.frame_id = manifest.pairs[i].frame_id;
        auto vals = m.values();
        for (size_t k = 0; k < vals.size(); ++k) sums[k] += vals[k];
        report.rows.push_back(std::move(m));
    }
    const double n = static_cast<double>(report.rows.size());
    report.means.ssim = sums[0] / n;
    report.means.ms_ssim = sums[1] / n;
    report.means.l1 = sums[2] / n;
    report.means.psnr = sums[3] / n;
    report.means.ag = sums[4] / n;
    report.means.mse = sums[5] / n;
    report.means.vif = sums[6] / n;
    report.means.cc = sums[7] / n;
    return report;
}

void MetricReport::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report csv: " + path);
    out << "frame_id";
    for (const auto& name : metric_names()) out << "," << name;
    out << "\n";
    out << std::setprecision(10);
    for (const auto& row : rows) {
        out << row.frame_id;
        for (double v : row.values()) out << "," << v;
        out << "\n";
    }
}

nlohmann::json MetricReport::summary_json() const {
    nlohmann::json j;
    j["pair_count"] = rows.size();
    auto vals = means.values();
    nlohmann::json m;
    for (size_t k = 0; k < vals.size(); ++k)
        m[metric_names()[k]] = std::isfinite(vals[k]) ? nlohmann::json(vals[k])
                                                      : nlohmann::json("inf");
    j["means"] = m;
    return j;
}

std::string MetricReport::render_table() const {
    std::ostringstream os;
    os << std::left << std::setw(28) << "pairs" << rows.size() << "\n";
    auto vals = means.values();
    for (size_t k = 0; k < vals.size(); ++k)
        os << std::left << std::setw(28) << metric_names()[k] << std::setprecision(6)
           << vals[k] << "\n";
    return os.str();
}

}  // namespace ladlenet
