// Shared fixtures for the test suites: tiny model configs, seeded synthetic
// images, and on-disk toy datasets in the KAIST directory layout.
#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include <opencv2/opencv.hpp>
#include <torch/torch.h>

#include "ladlenet/config.hpp"
#include "ladlenet/data.hpp"

namespace support {

/// Desk-scale channel schedule; shape and wiring identical to the default.
inline ladlenet::ModelConfig tiny_config(ladlenet::VariantFlags variant =
                                             ladlenet::VariantFlags::full()) {
    ladlenet::ModelConfig cfg;
    cfg.variant = variant;
    cfg.encoder_channels = {8, 16, 32, 64};
    cfg.code_channels = 128;
    return cfg;
}

inline ladlenet::PreprocessSpec small_preprocess() {
    ladlenet::PreprocessSpec spec;
    spec.resize_height = 96;
    spec.resize_width = 96;
    spec.crop_height = 64;
    spec.crop_width = 64;
    return spec;
}

/// Smooth, banded image in [0,1]; deterministic in (index, size).
inline cv::Mat synthetic_frame(int index, int size, bool thermal) {
    cv::Mat img(size, size, CV_8UC3);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double u = static_cast<double>(x) / size;
            const double v = static_cast<double>(y) / size;
            const double phase = 0.37 * index;
            double a = 0.5 + 0.4 * std::sin(6.0 * u + phase) * std::cos(4.0 * v - phase);
            double b = 0.5 + 0.4 * std::cos(3.0 * (u + v) + phase);
            double c = u * 0.5 + v * 0.3 + 0.1;
            if (thermal) {
                // thermal view: single-band content replicated
                const double t = 0.5 * a + 0.5 * c;
                img.at<cv::Vec3b>(y, x) = cv::Vec3b(cv::saturate_cast<uchar>(t * 255),
                                                    cv::saturate_cast<uchar>(t * 255),
                                                    cv::saturate_cast<uchar>(t * 255));
            } else {
                img.at<cv::Vec3b>(y, x) =
                    cv::Vec3b(cv::saturate_cast<uchar>(b * 255),
                              cv::saturate_cast<uchar>(c * 255),
                              cv::saturate_cast<uchar>(a * 255));
            }
        }
    return img;
}

/// KAIST-style tree: root/set00/V000/{lwir,visible}/I%05d.png
inline std::string make_toy_dataset(const std::string& root, int n_pairs, int image_size = 96) {
    namespace fs = std::filesystem;
    const fs::path seq = fs::path(root) / "set00" / "V000";
    fs::create_directories(seq / "lwir");
    fs::create_directories(seq / "visible");
    for (int i = 0; i < n_pairs; ++i) {
        char name[32];
        snprintf(name, sizeof(name), "I%05d.png", i);
        cv::imwrite((seq / "lwir" / name).string(), synthetic_frame(i, image_size, true));
        cv::imwrite((seq / "visible" / name).string(), synthetic_frame(i, image_size, false));
    }
    return root;
}

/// Manifest of n synthetic entries with no backing files (split tests only).
inline ladlenet::DatasetManifest fake_manifest(size_t n) {
    ladlenet::DatasetManifest m;
    for (size_t i = 0; i < n; ++i) {
        ladlenet::ImagePair p;
        p.frame_id = "set00/V000/I" + std::to_string(i);
        p.tir_path = "/nonexistent/tir" + std::to_string(i);
        p.vi_path = "/nonexistent/vi" + std::to_string(i);
        m.pairs.push_back(std::move(p));
    }
    return m;
}

/// Random image batch in [0,1], seeded.
inline torch::Tensor rand_image(uint64_t seed, int64_t b, int64_t h, int64_t w,
                                torch::Dtype dtype = torch::kFloat64) {
    torch::manual_seed(seed);
    return torch::rand({b, 3, h, w}, dtype);
}

inline std::string temp_dir(const std::string& tag) {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / ("ladlenet_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

}  // namespace support
