#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "ladlenet/config.hpp"

namespace ladlenet {

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

enum class Split { Unassigned, Train, Test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ImagePair {
    std::string tir_path;
    std::string vi_path;
    std::string set_id;    // e.g. "set01"
    std::string seq_id;    // e.g. "V000"
    std::string frame_id;  // e.g. "set01/V000/I00000"
    Split split = Split::Unassigned;
};

struct DatasetManifest {
    std::vector<ImagePair> pairs;
    uint64_t seed = 0;
    bool split_done = false;

    size_t count(Split s) const;
    std::vector<size_t> indices(Split s) const;

    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);
};

/// Walks a KAIST-style tree (root/setXX/VYYY/{lwir,visible}/frame.ext),
/// pairing lwir and visible frames by filename stem. Pairs are ordered
/// lexicographically by (set, sequence, frame). `sequences` is an optional
/// allow-list of sequence directory names (e.g. the daytime subset);
/// empty accepts all. Orphan frames are reported, not paired.
DatasetManifest scan_dataset(const std::string& root_dir, const std::vector<std::string>& sets,
                             const std::vector<std::string>& sequences = {},
                             std::vector<std::string>* unmatched = nullptr);

/// Seeded uniform shuffle then prefix split: floor(ratio*N) pairs train,
/// the rest test. Pair ordering in the manifest is unchanged.
DatasetManifest split_manifest(DatasetManifest m, double ratio, uint64_t seed);

/// Decode, bilinear-resize, center-crop and scale one image to a
/// (3,crop_h,crop_w) float tensor in [0,1]. Single-channel sources are
/// replicated to 3 channels.
torch::Tensor load_image_tensor(const std::string& path, const PreprocessSpec& spec);

std::pair<torch::Tensor, torch::Tensor> preprocess(const ImagePair& pair,
                                                   const PreprocessSpec& spec);

/// One epoch of (tir, vi) batches over a split, in a seeded per-epoch
/// shuffle order. The final partial batch is kept.
class BatchStream {
public:
    BatchStream(const DatasetManifest& manifest, Split split, int batch_size, uint64_t seed,
                int epoch, const PreprocessSpec& spec);

    std::optional<std::pair<torch::Tensor, torch::Tensor>> next();

    /// Frame ids in emission order for the whole epoch.
    std::vector<std::string> epoch_order() const;

private:
    const DatasetManifest& manifest_;
    PreprocessSpec spec_;
    std::vector<size_t> order_;
    size_t cursor_ = 0;
    int batch_size_;
};

}  // namespace ladlenet
