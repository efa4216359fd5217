// Python bindings for the core operations: losses, the metric suite, and a
// translator wrapping model build/load + inference. Images cross the boundary
// as float64 numpy arrays shaped (H, W, 3) with values in [0, 1].

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <torch/torch.h>

#include "ladlenet/config.hpp"
#include "ladlenet/losses.hpp"
#include "ladlenet/metrics.hpp"
#include "ladlenet/model.hpp"
#include "ladlenet/training.hpp"

namespace py = pybind11;
using namespace ladlenet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

torch::Tensor to_tensor(const Array& a) {
    if (a.ndim() != 3 || a.shape(2) != 3)
        throw py::value_error("expected an image array shaped (H, W, 3)");
    auto t = torch::from_blob(const_cast<double*>(a.data()),
                              {a.shape(0), a.shape(1), a.shape(2)}, torch::kFloat64)
                 .clone();
    return t.permute({2, 0, 1}).unsqueeze(0);  // (1, 3, H, W)
}

Array to_array(torch::Tensor t) {
    t = t.detach().to(torch::kFloat64).squeeze(0).permute({1, 2, 0}).contiguous();
    Array out({t.size(0), t.size(1), t.size(2)});
    std::memcpy(out.mutable_data(), t.data_ptr<double>(), sizeof(double) * t.numel());
    return out;
}

/// Owns a NetworkAssembly; built fresh from a config or loaded from a
/// training checkpoint.
class Translator {
public:
    Translator(std::vector<int64_t> encoder_channels, int64_t code_channels, bool cross_concat,
               bool cross_skip, uint64_t seed) {
        ModelConfig cfg;
        cfg.variant = {cross_concat, cross_skip, Backbone::BuiltinUnet};
        cfg.encoder_channels = std::move(encoder_channels);
        cfg.code_channels = code_channels;
        cfg.validate();
        assembly_ = build_ladlenet(cfg, seed);
        assembly_.model->eval();
    }

    explicit Translator(const std::string& checkpoint_path) {
        auto state = load_checkpoint_auto(checkpoint_path);
        assembly_ = state.model;
        assembly_.model->eval();
    }

    static Translator load(const std::string& path) { return Translator(path); }

    Array translate(const Array& tir) {
        torch::NoGradGuard ng;
        auto x = to_tensor(tir).to(torch::kFloat32);
        return to_array(assembly_.forward(x).first);
    }

    Array handle(const Array& tir) {
        torch::NoGradGuard ng;
        auto x = to_tensor(tir).to(torch::kFloat32);
        return to_array(assembly_.forward(x).second);
    }

    int64_t parameter_count() const { return count_parameters(assembly_); }

private:
    Translator() = default;
    NetworkAssembly assembly_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "TIR-to-visible translation: losses, metrics and inference";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def(
        "ssim",
        [](const Array& x, const Array& y) {
            return ladlenet::ssim(to_tensor(x), to_tensor(y), SsimParams{}).item<double>();
        },
        py::arg("fvi"), py::arg("vi"), "Mean SSIM over valid 11x11 Gaussian windows.");

    m.def(
        "ms_ssim",
        [](const Array& x, const Array& y, std::vector<double> omega) {
            MsSsimParams p;
            if (!omega.empty()) p.omega = std::move(omega);
            p.validate();
            return ladlenet::ms_ssim(to_tensor(x), to_tensor(y), p).item<double>();
        },
        py::arg("fvi"), py::arg("vi"), py::arg("omega") = std::vector<double>{},
        "Multi-scale SSIM with the sigma-schedule omega convention.");

    m.def(
        "total_loss",
        [](const Array& x, const Array& y, double alpha) {
            LossConfig cfg;
            cfg.alpha = alpha;
            cfg.validate();
            return ladlenet::total_loss(to_tensor(x), to_tensor(y), cfg).item<double>();
        },
        py::arg("fvi"), py::arg("vi"), py::arg("alpha") = 0.84,
        "Composite objective alpha * (1 - MS-SSIM) + (1 - alpha) * L1.");

    m.def(
        "metrics",
        [](const Array& x, const Array& y) {
            auto pm = compute_pair_metrics(to_tensor(x), to_tensor(y), SsimParams{},
                                           MsSsimParams{});
            py::dict out;
            const auto names = metric_names();
            const auto values = pm.values();
            for (size_t i = 0; i < names.size(); ++i) out[py::str(names[i])] = values[i];
            return out;
        },
        py::arg("fvi"), py::arg("vi"),
        "All eight evaluation metrics for one image pair, keyed by name.");

    py::class_<Translator>(m, "Translator")
        .def(py::init<std::vector<int64_t>, int64_t, bool, bool, uint64_t>(),
             py::arg("encoder_channels") = std::vector<int64_t>{64, 128, 256, 512},
             py::arg("code_channels") = 1024, py::arg("cross_concat") = true,
             py::arg("cross_skip") = true, py::arg("seed") = 0)
        .def_static("load", &Translator::load, py::arg("checkpoint_path"),
                    "Restore a translator from a training checkpoint.")
        .def("translate", &Translator::translate, py::arg("tir"),
             "Translate a (H, W, 3) thermal image in [0, 1] to a fake-visible image.")
        .def("handle", &Translator::handle, py::arg("tir"),
             "The Handle module's intermediate semantic map for a thermal image.")
        .def_property_readonly("parameter_count", &Translator::parameter_count);
}
