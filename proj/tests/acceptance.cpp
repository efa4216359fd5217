// Acceptance suite: one numbered criterion per check, one pass/fail line per
// criterion on stdout. Criterion 11 is a directional diagnostic — a violation
// is flagged in the output but does not fail the binary.
//
// argv[1] (optional) is the path to the ladlenet CLI binary, used by the
// reproducibility criterion; without it that sub-check is limited to the
// in-process round trip.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <torch/torch.h>

#include "ladlenet/config.hpp"
#include "ladlenet/data.hpp"
#include "ladlenet/losses.hpp"
#include "ladlenet/metrics.hpp"
#include "ladlenet/model.hpp"
#include "ladlenet/training.hpp"

#include "oracles.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace ladlenet;

namespace {

// Established empirically on the fixed seed below and pinned; see criterion 8.
constexpr double kOverfitSsimThreshold = 0.95;

int g_failures = 0;
std::string g_cli_binary;

void report(int number, const std::string& name, bool ok, const std::string& detail = "",
            bool gating = true) {
    const char* tag = ok ? "PASS" : (gating ? "FAIL" : "FLAG");
    std::printf("[%s] criterion %2d: %s%s%s\n", tag, number, name.c_str(),
                detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
    if (!ok && gating) ++g_failures;
}

void run(int number, const std::string& name,
         const std::function<bool(std::string&)>& body, bool gating = true) {
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    report(number, name, ok, detail, gating);
}

torch::Tensor rand01(std::mt19937_64& rng, int64_t h, int64_t w,
                     torch::Dtype dtype = torch::kFloat64) {
    torch::manual_seed(rng());
    return torch::rand({1, 3, h, w}, torch::TensorOptions().dtype(dtype));
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// --- criteria -------------------------------------------------------------

bool criterion_identities(std::string& detail) {
    std::mt19937_64 rng(11);
    const LossConfig cfg;  // alpha 0.84, default windows
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        auto x = rand01(rng, 64, 64);
        const double l1v = ladlenet::l1_loss(x, x).item<double>();
        const double s = ssim(x, x, cfg.ssim).item<double>();
        const double ms = ms_ssim(x, x, cfg.msssim).item<double>();
        const double msl = ms_ssim_loss(x, x, cfg.msssim).item<double>();
        const double tot = total_loss(x, x, cfg).item<double>();
        worst = std::max({worst, std::abs(l1v), std::abs(s - 1.0), std::abs(ms - 1.0),
                          std::abs(msl), std::abs(tot)});
    }
    detail = "max deviation " + std::to_string(worst);
    return worst <= 1e-6;
}

bool criterion_gradients(std::string& detail) {
    std::mt19937_64 rng(23);
    const LossConfig cfg;
    auto x0 = rand01(rng, 64, 64);
    auto y = rand01(rng, 64, 64);

    struct Fn {
        const char* name;
        std::function<torch::Tensor(const torch::Tensor&)> f;
    };
    const std::vector<Fn> fns = {
        {"l1_loss", [&](const torch::Tensor& x) { return ladlenet::l1_loss(x, y); }},
        {"ms_ssim_loss", [&](const torch::Tensor& x) { return ms_ssim_loss(x, y, cfg.msssim); }},
        {"total_loss", [&](const torch::Tensor& x) { return total_loss(x, y, cfg); }},
    };

    const int64_t n = x0.numel();
    std::uniform_int_distribution<int64_t> pick(0, n - 1);
    const double h = 1e-5;
    double worst_rel = 0;
    std::string worst_fn;
    for (const auto& fn : fns) {
        auto x = x0.clone().requires_grad_(true);
        auto loss = fn.f(x);
        loss.backward();
        auto grad = x.grad().reshape({-1});
        auto flat = x0.reshape({-1});
        // floor relative errors at the typical gradient scale so near-zero
        // coordinates (cancellation across scales) don't dominate
        const double scale = grad.abs().mean().item<double>();
        for (int k = 0; k < 50; ++k) {
            const int64_t idx = pick(rng);
            auto xp = flat.clone();
            auto xm = flat.clone();
            xp[idx] += h;
            xm[idx] -= h;
            const double fp = fn.f(xp.reshape(x0.sizes())).item<double>();
            const double fm = fn.f(xm.reshape(x0.sizes())).item<double>();
            const double fd = (fp - fm) / (2 * h);
            const double an = grad[idx].item<double>();
            const double rel =
                std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), scale});
            if (rel > worst_rel) {
                worst_rel = rel;
                worst_fn = fn.name;
            }
        }
    }
    detail = "worst relative error " + std::to_string(worst_rel) + " (" + worst_fn + ")";
    return worst_rel < 1e-3;
}

bool criterion_oracles(std::string& detail) {
    std::mt19937_64 rng(37);
    const SsimParams sp;
    const MsSsimParams mp;
    double w_ssim = 0, w_ms = 0, w_mse = 0, w_ag = 0, w_vif = 0;
    for (int i = 0; i < 20; ++i) {
        auto x = rand01(rng, 64, 64);
        auto y = 0.5 * x + 0.5 * rand01(rng, 64, 64);  // correlated pair
        const auto xi = oracle::to_image(x);
        const auto yi = oracle::to_image(y);

        w_ssim = std::max(w_ssim, std::abs(ssim(x, y, sp).item<double>() -
                                           oracle::ssim(xi, yi, sp.window_size, sp.window_sigma,
                                                        sp.c1, sp.c2)));
        w_ms = std::max(w_ms, std::abs(ms_ssim(x, y, mp).item<double>() -
                                       oracle::ms_ssim_sigma(xi, yi, mp.omega, mp.ssim.c1,
                                                             mp.ssim.c2)));
        w_mse = std::max(w_mse, std::abs(mse(x, y) - oracle::mse(xi, yi)));
        w_ag = std::max(w_ag, std::abs(avg_gradient(x) - oracle::avg_gradient(xi)));
        w_vif = std::max(w_vif, std::abs(vif(x, y) - oracle::vif(xi, yi)));
    }
    std::ostringstream os;
    os << "max |Δ|: ssim " << w_ssim << ", ms-ssim " << w_ms << ", mse " << w_mse << ", ag "
       << w_ag << ", vif " << w_vif;
    detail = os.str();
    return w_ssim <= 1e-5 && w_ms <= 1e-5 && w_mse <= 1e-9 && w_ag <= 1e-6 && w_vif <= 1e-3;
}

bool criterion_closed_forms(std::string& detail) {
    const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
    const SsimParams sp;

    auto zeros = torch::zeros({1, 3, 32, 32}, opts);
    auto ones = torch::ones({1, 3, 32, 32}, opts);
    const double s = ssim(zeros, ones, sp).item<double>();
    const double s_expect = sp.c1 / (1.0 + sp.c1);

    auto x = torch::zeros({1, 3, 16, 16}, opts);
    auto y = torch::full({1, 3, 16, 16}, 0.1, opts);  // MSE = 0.01
    const double p = psnr(x, y);

    const int64_t W = 32;
    auto ramp = torch::arange(0, W, opts).div(double(W - 1)).expand({1, 3, W, W});
    const double ag = avg_gradient(ramp);
    const double ag_expect = (1.0 / (W - 1)) / std::sqrt(2.0);

    torch::manual_seed(5);
    auto r = torch::rand({1, 3, 32, 32}, opts);
    const double corr = cc(r, 1.0 - r);

    std::ostringstream os;
    os << "ssim " << s << " vs " << s_expect << "; psnr " << p << "; ag " << ag << " vs "
       << ag_expect << "; cc " << corr;
    detail = os.str();
    return close(s, s_expect, 1e-6) && close(p, 20.0, 1e-6) && close(ag, ag_expect, 1e-6) &&
           close(corr, -1.0, 1e-6);
}

bool criterion_architecture(std::string& detail) {
    auto assembly = build_ladlenet(support::tiny_config(), 3);
    assembly.model->eval();
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> mul(2, 5);
    torch::NoGradGuard ng;
    for (int i = 0; i < 10; ++i) {
        const int64_t h = 16 * mul(rng), w = 16 * mul(rng);
        torch::manual_seed(rng());
        auto x = torch::rand({1, 3, h, w});
        auto [fvi, handle] = assembly.forward(x);
        if (!fvi.sizes().equals({1, 3, h, w})) {
            detail = "output shape mismatch";
            return false;
        }
        if (fvi.min().item<double>() < 0.0 || fvi.max().item<double>() > 1.0) {
            detail = "output outside [0,1]";
            return false;
        }
    }

    // connectivity: every trainable parameter sees a finite nonzero gradient
    auto trainable = build_ladlenet(support::tiny_config(), 4);
    trainable.model->train();
    torch::manual_seed(9);
    auto tir = torch::rand({2, 3, 64, 64});
    auto vi = torch::rand({2, 3, 64, 64});
    torch::Tensor fvi;
    {
        torch::AutoGradMode ag(true);
        fvi = trainable.forward(tir).first;
        total_loss(fvi, vi, LossConfig{}).backward();
    }
    int dead = 0;
    for (const auto& p : trainable.model->named_parameters()) {
        auto g = p.value().grad();
        if (!g.defined() || !g.isfinite().all().item<bool>() ||
            g.abs().sum().item<double>() == 0.0) {
            ++dead;
            detail += (detail.empty() ? "dead: " : ", ") + p.key();
        }
    }
    if (dead == 0) detail = "all parameters reached by nonzero finite gradients";
    return dead == 0;
}

bool criterion_variants(std::string& detail) {
    const auto baseline =
        count_parameters(build_ladlenet(support::tiny_config(VariantFlags::baseline())));
    const auto skip = count_parameters(
        build_ladlenet(support::tiny_config({false, true, Backbone::BuiltinUnet})));
    const auto concat = count_parameters(
        build_ladlenet(support::tiny_config({true, false, Backbone::BuiltinUnet})));
    const auto full = count_parameters(build_ladlenet(support::tiny_config()));

    bool rejected = false;
    try {
        VariantFlags bad{true, false, Backbone::SegmentationBackbone};
        bad.validate();
    } catch (const ConfigError&) {
        rejected = true;
    }
    std::ostringstream os;
    os << "params baseline " << baseline << " < +skip " << skip << ", +concat " << concat
       << ", full " << full << "; seg backbone cross flags "
       << (rejected ? "rejected" : "NOT rejected");
    detail = os.str();
    return baseline < skip && baseline < concat && baseline < full && rejected;
}

bool criterion_scheduler(std::string& detail) {
    OptimizerConfig opt;
    SchedulerConfig sched;

    // trace 1: flat losses reduce after epoch 3
    auto s = LrScheduleState::from(opt, sched);
    for (int e = 0; e < 3; ++e) s = scheduler_step(s, 1.0);
    if (!close(s.current_lr, 0.001, 1e-12)) {
        detail = "flat trace lr " + std::to_string(s.current_lr);
        return false;
    }

    // trace 2: strictly decreasing losses never reduce
    s = LrScheduleState::from(opt, sched);
    double loss = 1.0;
    for (int e = 0; e < 120; ++e) {
        s = scheduler_step(s, loss);
        loss *= 0.99;
    }
    if (!close(s.current_lr, 0.01, 1e-12)) {
        detail = "decreasing trace reduced lr";
        return false;
    }

    // trace 3: post-reduction cooldown freezes the counter for 5 epochs
    s = LrScheduleState::from(opt, sched);
    for (int e = 0; e < 3; ++e) s = scheduler_step(s, 1.0);  // reduction here
    for (int e = 0; e < 5; ++e) {
        s = scheduler_step(s, 1.0);
        if (!close(s.current_lr, 0.001, 1e-12) || s.non_improve_count != 0) {
            detail = "cooldown epoch changed state";
            return false;
        }
    }
    s = scheduler_step(s, 1.0);  // 6th flat epoch resumes counting
    if (s.non_improve_count != 1 || !close(s.current_lr, 0.001, 1e-12)) {
        detail = "counting did not resume after cooldown";
        return false;
    }

    // invariants over random sequences: lr = lr0 * 0.1^k, non-increasing,
    // reductions at least `cooldown` epochs apart
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 20; ++trial) {
        s = LrScheduleState::from(opt, sched);
        double prev_lr = s.current_lr;
        int last_reduction = -1000;
        for (int e = 0; e < 200; ++e) {
            s = scheduler_step(s, u(rng));
            if (s.current_lr > prev_lr + 1e-15) {
                detail = "lr increased";
                return false;
            }
            if (s.current_lr < prev_lr - 1e-15) {
                if (e - last_reduction < sched.cooldown) {
                    detail = "two reductions within cooldown";
                    return false;
                }
                last_reduction = e;
            }
            const double k = std::round(std::log10(opt.lr0 / s.current_lr));
            if (!close(s.current_lr, opt.lr0 * std::pow(0.1, k), 1e-15)) {
                detail = "lr not lr0*0.1^k";
                return false;
            }
            prev_lr = s.current_lr;
        }
    }
    detail = "all traces and invariants hold";
    return true;
}

bool criterion_overfit(std::string& detail) {
    const std::string dir = support::temp_dir("acc_overfit");
    support::make_toy_dataset(dir + "/data", 4, 96);
    auto manifest = scan_dataset(dir + "/data", {"set00"});
    for (auto& p : manifest.pairs) p.split = Split::Train;  // overfit: no held-out set
    manifest.split_done = true;

    auto model = build_ladlenet(support::tiny_config(), 17);
    model.model->train();
    const LossConfig loss_cfg;
    OptimizerConfig opt_cfg;  // §-recipe values: amsgrad Adam, lr0 0.01
    torch::optim::Adam optimizer(
        model.model->parameters(),
        torch::optim::AdamOptions(opt_cfg.lr0).amsgrad(opt_cfg.amsgrad));

    const auto spec = support::small_preprocess();
    double first_loss = -1, last_loss = -1;
    int step = 0;
    for (int epoch = 0; step < 200; ++epoch) {
        BatchStream stream(manifest, Split::Train, 4, 17, epoch, spec);
        while (auto batch = stream.next()) {
            auto [tir, vi] = *batch;
            optimizer.zero_grad();
            auto fvi = model.forward(tir).first;
            auto loss = total_loss(fvi, vi, loss_cfg);
            loss.backward();
            optimizer.step();
            ++step;
            const double v = loss.item<double>();
            if (step == 1) first_loss = v;
            last_loss = v;
            if (step >= 200) break;
        }
    }

    // training SSIM after overfitting
    model.model->eval();
    torch::NoGradGuard ng;
    double ssim_sum = 0;
    int n = 0;
    for (const auto& pair : manifest.pairs) {
        auto [tir, vi] = preprocess(pair, spec);
        auto fvi = model.forward(tir.unsqueeze(0)).first;
        ssim_sum += ssim(fvi, vi.unsqueeze(0), loss_cfg.ssim).item<double>();
        ++n;
    }
    const double mean_ssim = ssim_sum / n;
    const double reduction = 1.0 - last_loss / first_loss;

    std::ostringstream os;
    os << "loss " << first_loss << " -> " << last_loss << " (reduction "
       << 100.0 * reduction << "%), train SSIM " << mean_ssim << " (threshold "
       << kOverfitSsimThreshold << ")";
    detail = os.str();
    fs::remove_all(dir);
    return reduction >= 0.90 && mean_ssim >= kOverfitSsimThreshold;
}

bool criterion_data_protocol(std::string& detail) {
    auto m = support::fake_manifest(16176);
    m = split_manifest(m, 0.8, 99);
    const size_t train = m.count(Split::Train), test = m.count(Split::Test);
    if (train != 12940 || test != 3236) {
        detail = "split " + std::to_string(train) + "/" + std::to_string(test);
        return false;
    }
    auto ti = m.indices(Split::Train);
    auto te = m.indices(Split::Test);
    std::vector<char> seen(m.pairs.size(), 0);
    for (auto i : ti) seen[i] = 1;
    for (auto i : te)
        if (seen[i]) {
            detail = "split intersection nonempty";
            return false;
        }

    // preprocess contract at full scale: 300x400 resize, (54,72) crop offsets
    const std::string dir = support::temp_dir("acc_data");
    cv::Mat img(512, 512, CV_8UC3);
    cv::randu(img, 0, 255);
    const std::string path = dir + "/frame.png";
    cv::imwrite(path, img);
    PreprocessSpec spec;  // defaults: 300x400 -> 192x256
    auto t = load_image_tensor(path, spec);
    const bool shape_ok = t.sizes().equals({3, 192, 256});

    cv::Mat resized;
    cv::resize(img, resized, cv::Size(400, 300), 0, 0, cv::INTER_LINEAR);
    const cv::Vec3b px = resized.at<cv::Vec3b>(54, 72);  // BGR
    const bool offset_ok = close(t[0][0][0].item<double>(), px[2] / 255.0, 1e-6) &&
                           close(t[1][0][0].item<double>(), px[1] / 255.0, 1e-6) &&
                           close(t[2][0][0].item<double>(), px[0] / 255.0, 1e-6);
    fs::remove_all(dir);
    detail = "split 12940/3236 disjoint; tensor (3,192,256) offsets (54,72)";
    return shape_ok && offset_ok;
}

bool criterion_reproducibility(std::string& detail) {
    const std::string dir = support::temp_dir("acc_repro");
    support::make_toy_dataset(dir + "/data", 4, 96);
    auto manifest = split_manifest(scan_dataset(dir + "/data", {"set00"}), 0.8, 1);

    auto model = build_ladlenet(support::tiny_config(), 21);
    const LossConfig loss_cfg;
    TrainOptions options;
    options.epochs = 1;
    options.batch_size = 4;
    options.seed = 21;
    options.output_dir = dir + "/out";
    options.checkpoint_every = 1;
    auto state = train(model, manifest, loss_cfg, OptimizerConfig{}, SchedulerConfig{},
                       support::small_preprocess(), options);

    auto loaded = load_checkpoint(dir + "/out/last.ckpt", state.model.config, loss_cfg);
    state.model.model->eval();
    loaded.model.model->eval();
    torch::NoGradGuard ng;
    torch::manual_seed(77);
    auto x = torch::rand({1, 3, 64, 64});
    const bool bitwise =
        state.model.forward(x).first.equal(loaded.model.forward(x).first);
    if (!bitwise) {
        detail = "round-trip outputs differ";
        fs::remove_all(dir);
        return false;
    }

    bool cli_ok = true;
    if (!g_cli_binary.empty()) {
        const std::string tir = dir + "/data/set00/V000/lwir/I00000.png";
        for (int i = 1; i <= 2; ++i) {
            const std::string cmd = g_cli_binary + " translate --checkpoint " + dir +
                                    "/out/last.ckpt --input " + tir + " --output " + dir +
                                    "/t" + std::to_string(i) + ".png >/dev/null 2>&1";
            if (std::system(cmd.c_str()) != 0) cli_ok = false;
        }
        auto slurp = [](const std::string& p) {
            std::ifstream in(p, std::ios::binary);
            return std::string((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
        };
        const auto b1 = slurp(dir + "/t1.png");
        cli_ok = cli_ok && !b1.empty() && b1 == slurp(dir + "/t2.png");
        detail = bitwise && cli_ok ? "checkpoint round trip bitwise; translate byte-identical"
                                   : "translate outputs differ";
    } else {
        detail = "checkpoint round trip bitwise (no CLI binary supplied)";
    }
    fs::remove_all(dir);
    return bitwise && cli_ok;
}

bool criterion_ablation(std::string& detail) {
    const std::string dir = support::temp_dir("acc_ablate");
    support::make_toy_dataset(dir + "/data", 200, 96);
    auto manifest = scan_dataset(dir + "/data", {"set00"});
    for (auto& p : manifest.pairs) p.split = Split::Train;
    manifest.split_done = true;

    const auto spec = support::small_preprocess();
    const LossConfig loss_cfg;
    auto final_loss = [&](VariantFlags variant) {
        auto model = build_ladlenet(support::tiny_config(variant), 31);
        TrainOptions options;
        options.epochs = 30;
        options.batch_size = 40;
        options.seed = 31;
        auto state = train(model, manifest, loss_cfg, OptimizerConfig{}, SchedulerConfig{},
                           spec, options);
        return state.loss_history.back();
    };
    const double full = final_loss(VariantFlags::full());
    const double baseline = final_loss(VariantFlags::baseline());
    fs::remove_all(dir);
    std::ostringstream os;
    os << "final loss full " << full << (full <= baseline ? " <= " : " > ") << "baseline "
       << baseline;
    detail = os.str();
    return full <= baseline;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_cli_binary = argv[1];
    torch::set_num_threads(std::max(1u, std::thread::hardware_concurrency()));

    run(1, "loss identities at self-comparison", criterion_identities);
    run(2, "analytic gradients match finite differences", criterion_gradients);
    run(3, "metrics match brute-force oracles", criterion_oracles);
    run(4, "closed-form metric spot values", criterion_closed_forms);
    run(5, "architecture shape/range/connectivity contracts", criterion_architecture);
    run(6, "variant wiring and parameter ordering", criterion_variants);
    run(7, "plateau scheduler state machine", criterion_scheduler);
    run(8, "4-pair overfit smoke", criterion_overfit);
    run(9, "data split and preprocess protocol", criterion_data_protocol);
    run(10, "checkpoint and CLI reproducibility", criterion_reproducibility);
    run(11, "directional ablation smoke (diagnostic)", criterion_ablation,
        /*gating=*/false);

    std::printf("%s (%d gating failure%s)\n", g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
                g_failures, g_failures == 1 ? "" : "s");
    return g_failures == 0 ? 0 : 1;
}
