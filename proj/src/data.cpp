#include "ladlenet/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include <opencv2/opencv.hpp>

namespace fs = std::filesystem;

namespace ladlenet {

std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Test: return "test";
        case Split::Unassigned: return "unassigned";
    }
    throw DataError("unknown split enum value");
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    if (s == "unassigned") return Split::Unassigned;
    throw DataError("unknown split name: " + s);
}

size_t DatasetManifest::count(Split s) const {
    return static_cast<size_t>(
        std::count_if(pairs.begin(), pairs.end(), [&](const auto& p) { return p.split == s; }));
}

std::vector<size_t> DatasetManifest::indices(Split s) const {
    std::vector<size_t> idx;
    for (size_t i = 0; i < pairs.size(); ++i)
        if (pairs[i].split == s) idx.push_back(i);
    return idx;
}

void DatasetManifest::save(const std::string& path) const {
    nlohmann::json j;
    j["seed"] = seed;
    j["split_done"] = split_done;
    auto& arr = j["pairs"] = nlohmann::json::array();
    for (const auto& p : pairs)
        arr.push_back({{"tir", p.tir_path}, {"vi", p.vi_path}, {"set", p.set_id},
                       {"seq", p.seq_id}, {"frame", p.frame_id}, {"split", to_string(p.split)}});
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read manifest: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest parse error: " + std::string(e.what()));
    }
    DatasetManifest m;
    m.seed = j.value("seed", 0ull);
    m.split_done = j.value("split_done", false);
    for (const auto& e : j.at("pairs")) {
        ImagePair p;
        p.tir_path = e.at("tir");
        p.vi_path = e.at("vi");
        p.set_id = e.value("set", "");
        p.seq_id = e.value("seq", "");
        p.frame_id = e.at("frame");
        p.split = split_from_string(e.value("split", "unassigned"));
        m.pairs.push_back(std::move(p));
    }
    return m;
}

namespace {

bool is_image_file(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp";
}

std::map<std::string, fs::path> frames_by_stem(const fs::path& dir) {
    std::map<std::string, fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path())) out[e.path().stem().string()] = e.path();
    return out;
}

}  // namespace

DatasetManifest scan_dataset(const std::string& root_dir, const std::vector<std::string>& sets,
                             const std::vector<std::string>& sequences,
                             std::vector<std::string>* unmatched) {
    if (!fs::is_directory(root_dir)) throw DataError("dataset root missing: " + root_dir);
    std::vector<std::string> set_names = sets;
    if (set_names.empty()) {
        for (const auto& e : fs::directory_iterator(root_dir))
            if (e.is_directory()) set_names.push_back(e.path().filename().string());
    }
    std::sort(set_names.begin(), set_names.end());

    DatasetManifest m;
    for (const auto& set_name : set_names) {
        const fs::path set_dir = fs::path(root_dir) / set_name;
        if (!fs::is_directory(set_dir)) throw DataError("dataset set missing: " + set_dir.string());
        std::vector<std::string> seq_names;
        for (const auto& e : fs::directory_iterator(set_dir))
            if (e.is_directory()) seq_names.push_back(e.path().filename().string());
        std::sort(seq_names.begin(), seq_names.end());
        for (const auto& seq : seq_names) {
            if (!sequences.empty() &&
                std::find(sequences.begin(), sequences.end(), seq) == sequences.end())
                continue;
            auto tir = frames_by_stem(set_dir / seq / "lwir");
            auto vi = frames_by_stem(set_dir / seq / "visible");
            for (const auto& [stem, tir_path] : tir) {
                auto it = vi.find(stem);
                if (it == vi.end()) {
                    if (unmatched) unmatched->push_back(tir_path.string());
                    continue;
                }
                ImagePair p;
                p.tir_path = tir_path.string();
                p.vi_path = it->second.string();
                p.set_id = set_name;
                p.seq_id = seq;
                p.frame_id = set_name + "/" + seq + "/" + stem;
                m.pairs.push_back(std::move(p));
            }
            for (const auto& [stem, vi_path] : vi)
                if (unmatched && !tir.count(stem)) unmatched->push_back(vi_path.string());
        }
    }
    if (m.pairs.empty()) throw DataError("no image pairs found under: " + root_dir);
    return m;
}

DatasetManifest split_manifest(DatasetManifest m, double ratio, uint64_t seed) {
    if (ratio <= 0.0 || ratio >= 1.0) throw DataError("split ratio must be in (0,1)");
    std::vector<size_t> order(m.pairs.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const size_t n_train = static_cast<size_t>(ratio * static_cast<double>(m.pairs.size()));
    for (size_t i = 0; i < order.size(); ++i)
        m.pairs[order[i]].split = i < n_train ? Split::Train : Split::Test;
    m.seed = seed;
    m.split_done = true;
    return m;
}

torch::Tensor load_image_tensor(const std::string& path, const PreprocessSpec& spec) {
    spec.validate();
    cv::Mat img = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (img.empty()) throw DataError("cannot decode image: " + path);
    if (img.channels() == 1)
        cv::cvtColor(img, img, cv::COLOR_GRAY2RGB);
    else if (img.channels() == 4)
        cv::cvtColor(img, img, cv::COLOR_BGRA2RGB);
    else
        cv::cvtColor(img, img, cv::COLOR_BGR2RGB);
    cv::Mat resized;
    cv::resize(img, resized, cv::Size(spec.resize_width, spec.resize_height), 0, 0,
               cv::INTER_LINEAR);
    cv::Rect roi(spec.crop_offset_x(), spec.crop_offset_y(), spec.crop_width, spec.crop_height);
    cv::Mat cropped = resized(roi).clone();
    cv::Mat f;
    cropped.convertTo(f, CV_32FC3, 1.0 / 255.0);
    auto t = torch::from_blob(f.data, {spec.crop_height, spec.crop_width, 3}, torch::kFloat32)
                 .permute({2, 0, 1})
                 .clone();
    return t;
}

std::pair<torch::Tensor, torch::Tensor> preprocess(const ImagePair& pair,
                                                   const PreprocessSpec& spec) {
    return {load_image_tensor(pair.tir_path, spec), load_image_tensor(pair.vi_path, spec)};
}

BatchStream::BatchStream(const DatasetManifest& manifest, Split split, int batch_size,
                         uint64_t seed, int epoch, const PreprocessSpec& spec)
    : manifest_(manifest), spec_(spec), batch_size_(batch_size) {
    if (batch_size < 1) throw DataError("batch_size must be >= 1");
    order_ = manifest.indices(split);
    if (order_.empty()) throw DataError("split has no pairs: " + to_string(split));
    // per-epoch order is a pure function of (seed, epoch)
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * (static_cast<uint64_t>(epoch) + 1)));
    std::shuffle(order_.begin(), order_.end(), rng);
}

std::optional<std::pair<torch::Tensor, torch::Tensor>> BatchStream::next() {
    if (cursor_ >= order_.size()) return std::nullopt;
    const size_t n = std::min<size_t>(batch_size_, order_.size() - cursor_);
    std::vector<torch::Tensor> tirs, vis;
    tirs.reserve(n);
    vis.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        auto [tir, vi] = preprocess(manifest_.pairs[order_[cursor_ + i]], spec_);
        tirs.push_back(tir);
        vis.push_back(vi);
    }
    cursor_ += n;
    return std::make_pair(torch::stack(tirs), torch::stack(vis));
}

std::vector<std::string> BatchStream::epoch_order() const {
    std::vector<std::string> ids;
    ids.reserve(order_.size());
    for (auto i : order_) ids.push_back(manifest_.pairs[i].frame_id);
    return ids;
}

}  // namespace ladlenet
