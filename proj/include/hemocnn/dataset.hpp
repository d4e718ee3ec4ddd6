#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hemocnn/tensor.hpp"

namespace hemocnn {

struct Sample {
    std::filesystem::path path;
    std::size_t label = 0;
};

/// Folder-per-class catalog. Class ids follow lexicographic folder order,
/// files are listed lexicographically within each class.
struct DatasetIndex {
    std::vector<std::string> class_names;
    std::vector<Sample> samples;
    std::vector<std::size_t> counts;  // per class
    std::size_t ignored_files = 0;    // non-image entries skipped by scan_dataset

    std::size_t num_classes() const { return class_names.size(); }
    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

/// True for .jpg/.jpeg/.png in any letter case.
bool is_image_file(const std::filesystem::path& path);

/// Scans `<root>/<class>/<image>`. Throws DataError for a missing root,
/// fewer than two class folders, or a class folder without images.
DatasetIndex scan_dataset(const std::filesystem::path& root);

struct SplitSpec {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
    std::uint64_t seed = 0;
};

struct DatasetSplit {
    DatasetIndex train;
    DatasetIndex val;
    DatasetIndex test;
    std::vector<std::string> warnings;
};

/// Per-class stratified partition after a seeded shuffle. Per-class counts
/// use largest-remainder rounding, so each differs from ratio*count by < 1.
/// Throws ConfigError for negative ratios or ratios not summing to 1.
DatasetSplit split(const DatasetIndex& index, const SplitSpec& spec);

/// A decoded mini-batch; images are [N, 3, H, W] in [0, 1].
struct Batch {
    Tensor images;
    std::vector<std::size_t> labels;
    std::vector<std::size_t> sources;  // positions in the view
};

/// Shuffled sample positions for one epoch, chunked into batches; the last
/// batch may be short. Keyed on (seed, epoch).
std::vector<std::vector<std::size_t>> batch_order(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                  std::uint64_t epoch);

/// Decodes and resizes images on first use and keeps up to `max_bytes` of
/// them in memory.
class ImageCache {
public:
    ImageCache(std::size_t height, std::size_t width, std::size_t max_bytes = std::size_t{1} << 30);

    Tensor get(const std::filesystem::path& path);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }

private:
    std::size_t height_, width_, max_bytes_, used_bytes_ = 0;
    std::map<std::filesystem::path, Tensor> entries_;
};

Batch make_batch(const DatasetIndex& view, const std::vector<std::size_t>& positions, ImageCache& cache);

/// Every batch of one epoch, in order. An empty view yields no batches.
std::vector<Batch> batches(const DatasetIndex& view, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch,
                           ImageCache& cache);

}  // namespace hemocnn
