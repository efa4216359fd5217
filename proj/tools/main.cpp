#include <glob.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "ladlenet/config.hpp"
#include "ladlenet/data.hpp"
#include "ladlenet/losses.hpp"
#include "ladlenet/metrics.hpp"
#include "ladlenet/model.hpp"
#include "ladlenet/training.hpp"

namespace fs = std::filesystem;
using namespace ladlenet;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error: " + std::string(e.what()));
    }
    RunConfig cfg = j.get<RunConfig>();
    if (cfg.data.root.empty())
        if (const char* env = std::getenv("LADLENET_DATA_ROOT")) cfg.data.root = env;
    cfg.validate();
    return cfg;
}

DatasetManifest prepare_manifest(const RunConfig& cfg) {
    std::vector<std::string> unmatched;
    auto manifest = scan_dataset(cfg.data.root, cfg.data.sets, cfg.data.sequences, &unmatched);
    for (const auto& orphan : unmatched)
        std::cerr << "warning: unmatched frame skipped: " << orphan << "\n";
    return split_manifest(std::move(manifest), cfg.data.split_ratio, cfg.data.split_seed);
}

NetworkAssembly build_from_config(const RunConfig& cfg, uint64_t seed) {
    return cfg.model.variant.backbone == Backbone::BridgedUnet
               ? build_bridged_unet(cfg.model, seed)
               : build_ladlenet(cfg.model, seed);
}

int cmd_train(const std::string& config_path, std::optional<uint64_t> seed_override,
              std::optional<std::string> out_override) {
    RunConfig cfg = load_run_config(config_path);
    if (seed_override) cfg.training.seed = *seed_override;
    if (out_override) cfg.output_dir = *out_override;

    auto manifest = prepare_manifest(cfg);
    fs::create_directories(cfg.output_dir);
    manifest.save((fs::path(cfg.output_dir) / "manifest.json").string());

    auto model = build_from_config(cfg, cfg.training.seed);
    TrainOptions options;
    options.epochs = cfg.training.epochs;
    options.batch_size = cfg.training.batch_size;
    options.seed = cfg.training.seed;
    options.checkpoint_every = cfg.training.checkpoint_every;
    options.output_dir = cfg.output_dir;
    options.snapshot_pair = cfg.training.snapshot_pair;
    options.on_epoch = [](int epoch, double loss, double lr) {
        std::cout << "epoch " << epoch << "  mean_loss " << loss << "  lr " << lr << std::endl;
    };
    train(std::move(model), manifest, cfg.loss, cfg.optimizer, cfg.scheduler,
          cfg.data.preprocess, options);
    std::cout << "training complete; outputs in " << cfg.output_dir << "\n";
    return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& manifest_path,
                 const std::string& out_dir, const std::string& config_path) {
    TrainState state;
    if (!config_path.empty()) {
        RunConfig cfg = load_run_config(config_path);
        state = load_checkpoint(checkpoint, cfg.model, cfg.loss);
    } else {
        state = load_checkpoint_auto(checkpoint);
    }
    auto manifest = DatasetManifest::load(manifest_path);
    std::optional<Split> split;
    if (manifest.split_done) split = Split::Test;
    PreprocessSpec spec;
    auto report = evaluate_pairs(manifest, state.model, spec, split);
    fs::create_directories(out_dir);
    report.write_csv((fs::path(out_dir) / "report.csv").string());
    std::ofstream js((fs::path(out_dir) / "summary.json").string());
    js << report.summary_json().dump(2) << "\n";
    std::cout << report.render_table();
    return 0;
}

int cmd_translate(const std::string& checkpoint, const std::string& input,
                  const std::string& output) {
    auto state = load_checkpoint_auto(checkpoint);
    PreprocessSpec spec;
    auto tir = load_image_tensor(input, spec);
    state.model.eval();
    torch::NoGradGuard guard;
    auto fvi = state.model.forward(tir.unsqueeze(0)).first;
    write_png(fvi, output);
    std::cout << "wrote " << output << "\n";
    return 0;
}

struct VariantSpec {
    ModelConfig model;
    bool needs_pretrained = false;
};

VariantSpec resolve_variant(const std::string& name, const RunConfig& cfg) {
    VariantSpec v;
    v.model = cfg.model;
    v.model.pretrained_source.clear();
    if (name == "baseline") {
        v.model.variant = VariantFlags::baseline();
    } else if (name == "+skip") {
        v.model.variant = {false, true, Backbone::BuiltinUnet};
    } else if (name == "+concat") {
        v.model.variant = {true, false, Backbone::BuiltinUnet};
    } else if (name == "full") {
        v.model.variant = VariantFlags::full();
    } else if (name == "bridged-unet") {
        v.model.variant = {false, false, Backbone::BridgedUnet};
    } else if (name == "ladlenet+_no_pre") {
        v.model.variant = {false, false, Backbone::SegmentationBackbone};
    } else if (name == "ladlenet+") {
        v.model.variant = {false, false, Backbone::SegmentationBackbone};
        v.model.pretrained_source = cfg.model.pretrained_source;
        v.needs_pretrained = true;
    } else {
        throw ConfigError("unknown ablation variant: " + name);
    }
    return v;
}

int cmd_ablate(const std::string& config_path) {
    RunConfig cfg = load_run_config(config_path);
    if (cfg.variants.empty()) throw ConfigError("ablate: config lists no variants");
    // fail fast: resolve every variant before training anything
    std::vector<std::pair<std::string, VariantSpec>> specs;
    for (const auto& name : cfg.variants) {
        auto v = resolve_variant(name, cfg);
        if (v.needs_pretrained && v.model.pretrained_source.empty())
            throw ConfigError("ablate: variant ladlenet+ requires model.pretrained_source");
        v.model.validate();
        specs.emplace_back(name, std::move(v));
    }
    auto manifest = prepare_manifest(cfg);
    fs::create_directories(cfg.output_dir);
    manifest.save((fs::path(cfg.output_dir) / "manifest.json").string());

    std::map<std::string, TrainState> states;
    std::map<std::string, PairMetrics> results;
    for (const auto& [name, vspec] : specs) {
        std::cout << "== variant " << name << " ==" << std::endl;
        auto model = vspec.model.variant.backbone == Backbone::BridgedUnet
                         ? build_bridged_unet(vspec.model, cfg.training.seed)
                         : build_ladlenet(vspec.model, cfg.training.seed);
        TrainOptions options;
        options.epochs = cfg.training.epochs;
        options.batch_size = cfg.training.batch_size;
        options.seed = cfg.training.seed;
        options.checkpoint_every = 0;
        options.output_dir = (fs::path(cfg.output_dir) / name).string();
        auto state = train(std::move(model), manifest, cfg.loss, cfg.optimizer, cfg.scheduler,
                           cfg.data.preprocess, options);
        auto report =
            evaluate_pairs(manifest, state.model, cfg.data.preprocess, Split::Test);
        results[name] = report.means;
        states[name] = std::move(state);
    }

    // variant x {SSIM, MS-SSIM, L1, PSNR} comparison table
    std::ofstream table((fs::path(cfg.output_dir) / "ablation.csv").string());
    table << "variant,SSIM,MS-SSIM,L1,PSNR\n" << std::setprecision(10);
    for (const auto& name : cfg.variants) {
        const auto& m = results[name];
        table << name << "," << m.ssim << "," << m.ms_ssim << "," << m.l1 << "," << m.psnr
              << "\n";
        std::cout << std::left << std::setw(18) << name << std::setprecision(4) << "SSIM "
                  << m.ssim << "  MS-SSIM " << m.ms_ssim << "  L1 " << m.l1 << "  PSNR "
                  << m.psnr << "\n";
    }
    // overlaid loss-curve data, one column per variant
    std::ofstream curves((fs::path(cfg.output_dir) / "loss_curves.csv").string());
    curves << "epoch";
    for (const auto& name : cfg.variants) curves << "," << name;
    curves << "\n" << std::setprecision(10);
    for (int e = 0; e < cfg.training.epochs; ++e) {
        curves << (e + 1);
        for (const auto& name : cfg.variants) {
            const auto& h = states[name].loss_history;
            curves << ",";
            if (e < static_cast<int>(h.size())) curves << h[e];
        }
        curves << "\n";
    }
    return 0;
}

int cmd_dump_handle(const std::string& pattern, const std::string& input,
                    const std::string& out_dir) {
    glob_t g{};
    std::vector<std::string> matches;
    if (glob(pattern.c_str(), 0, nullptr, &g) == 0)
        for (size_t i = 0; i < g.gl_pathc; ++i) matches.emplace_back(g.gl_pathv[i]);
    globfree(&g);
    std::erase_if(matches, [](const std::string& p) { return p.ends_with(".json"); });
    if (matches.empty()) throw ConfigError("dump-handle: no checkpoints match " + pattern);

    PreprocessSpec spec;
    auto tir = load_image_tensor(input, spec).unsqueeze(0);
    fs::create_directories(out_dir);
    std::vector<std::pair<int, std::string>> by_epoch;
    for (const auto& path : matches) {
        auto state = load_checkpoint_auto(path);
        by_epoch.emplace_back(state.epoch, path);
    }
    std::sort(by_epoch.begin(), by_epoch.end());
    for (const auto& [epoch, path] : by_epoch) {
        auto state = load_checkpoint_auto(path);
        state.model.eval();
        torch::NoGradGuard guard;
        auto handle_out = state.model.forward(tir).second;
        char name[64];
        snprintf(name, sizeof(name), "handle_epoch_%04d.png", epoch);
        const std::string out = (fs::path(out_dir) / name).string();
        write_png(handle_out, out);
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LadleNet thermal-to-visible image translation"};
    app.require_subcommand(1);

    std::string config_path, checkpoint, manifest_path, input, output, out_dir = "out";
    std::string pattern;
    std::vector<std::string> checkpoints;
    std::optional<uint64_t> seed;
    std::optional<std::string> out_override;

    auto* train_cmd = app.add_subcommand("train", "Train a model from a run config");
    train_cmd->add_option("--config", config_path, "run config (JSON)")->required();
    uint64_t seed_val = 0;
    bool seed_set = false;
    train_cmd->add_option("--seed", seed_val, "override training seed")
        ->each([&](const std::string&) { seed_set = true; });
    std::string out_val;
    train_cmd->add_option("--out", out_val, "override output dir");

    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint over a manifest");
    eval_cmd->add_option("--checkpoint", checkpoint)->required();
    eval_cmd->add_option("--manifest", manifest_path)->required();
    eval_cmd->add_option("--out", out_dir);
    std::string eval_config;
    eval_cmd->add_option("--config", eval_config, "verify checkpoint against this config");

    auto* translate_cmd = app.add_subcommand("translate", "Translate one TIR image");
    translate_cmd->add_option("--checkpoint", checkpoint)->required();
    translate_cmd->add_option("--input", input)->required();
    translate_cmd->add_option("--output", output)->required();

    auto* compare_cmd =
        app.add_subcommand("compare", "Evaluate several checkpoints over one manifest");
    compare_cmd->add_option("--checkpoint", checkpoints, "repeatable")->required();
    compare_cmd->add_option("--manifest", manifest_path)->required();
    compare_cmd->add_option("--out", out_dir);

    auto* ablate_cmd = app.add_subcommand("ablate", "Train and compare config-listed variants");
    ablate_cmd->add_option("--config", config_path)->required();

    auto* dump_cmd = app.add_subcommand("dump-handle", "Handle-output snapshots per checkpoint");
    dump_cmd->add_option("--checkpoints", pattern, "checkpoint glob")->required();
    dump_cmd->add_option("--input", input, "TIR image")->required();
    dump_cmd->add_option("--out", out_dir);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd)
            return cmd_train(config_path, seed_set ? std::optional(seed_val) : std::nullopt,
                             out_val.empty() ? std::nullopt : std::optional(out_val));
        if (*eval_cmd) return cmd_evaluate(checkpoint, manifest_path, out_dir, eval_config);
        if (*translate_cmd) return cmd_translate(checkpoint, input, output);
        if (*compare_cmd) {
            for (const auto& ckpt : checkpoints) {
                const std::string sub =
                    (fs::path(out_dir) / fs::path(ckpt).stem().string()).string();
                std::cout << "== " << ckpt << " ==\n";
                cmd_evaluate(ckpt, manifest_path, sub, "");
            }
            return 0;
        }
        if (*ablate_cmd) return cmd_ablate(config_path);
        if (*dump_cmd) return cmd_dump_handle(pattern, input, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return std::string(e.what()).find("non-finite") != std::string::npos ? kExitNumeric
                                                                             : kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
