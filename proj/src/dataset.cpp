#include "hemocnn/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "hemocnn/errors.hpp"
#include "hemocnn/image_io.hpp"
#include "hemocnn/rng.hpp"

namespace fs = std::filesystem;

namespace hemocnn {

bool is_image_file(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

DatasetIndex scan_dataset(const fs::path& root) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        throw DataError(DataError::Kind::MissingRoot, "dataset root '" + root.string() + "' is not a directory");
    }

    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) class_dirs.push_back(entry.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    if (class_dirs.size() < 2) {
        throw DataError(DataError::Kind::TooFewClasses, "dataset root '" + root.string() + "' has " +
                                                            std::to_string(class_dirs.size()) +
                                                            " class folders; at least 2 are required");
    }

    DatasetIndex index;
    for (std::size_t label = 0; label < class_dirs.size(); ++label) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(class_dirs[label])) {
            if (entry.is_regular_file() && is_image_file(entry.path())) {
                files.push_back(entry.path());
            } else {
                ++index.ignored_files;
            }
        }
        if (files.empty()) {
            throw DataError(DataError::Kind::EmptyClass,
                            "class folder '" + class_dirs[label].string() + "' contains no images");
        }
        std::sort(files.begin(), files.end(),
                  [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
        index.class_names.push_back(class_dirs[label].filename().string());
        index.counts.push_back(files.size());
        for (auto& f : files) index.samples.push_back({std::move(f), label});
    }
    return index;
}

namespace {

DatasetIndex empty_view_like(const DatasetIndex& index) {
    DatasetIndex v;
    v.class_names = index.class_names;
    v.counts.assign(index.num_classes(), 0);
    return v;
}

// Largest-remainder apportionment of `total` items to `ratios`; ties in the
// fractional part go to the earlier split.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& ratios) {
    std::vector<std::size_t> counts(ratios.size());
    std::vector<double> frac(ratios.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        const double exact = ratios[i] * static_cast<double>(total);
        counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        frac[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    while (assigned > total) {
        // Only reachable through the 1e-9 slack; take back from the largest.
        auto it = std::max_element(counts.begin(), counts.end());
        --*it;
        --assigned;
    }
    std::vector<std::size_t> order(ratios.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
        if (ratios[order[k]] > 0) {
            ++counts[order[k]];
            ++assigned;
        }
    }
    return counts;
}

}  // namespace

DatasetSplit split(const DatasetIndex& index, const SplitSpec& spec) {
    const std::vector<double> ratios{spec.train, spec.val, spec.test};
    for (double r : ratios)
        if (!(r >= 0)) throw ConfigError("split ratios must be non-negative");
    if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-6) throw ConfigError("split ratios must sum to 1");

    DatasetSplit out{empty_view_like(index), empty_view_like(index), empty_view_like(index), {}};
    DatasetIndex* views[3] = {&out.train, &out.val, &out.test};
    static constexpr const char* names[3] = {"train", "val", "test"};

    std::vector<std::vector<std::size_t>> by_class(index.num_classes());
    for (std::size_t i = 0; i < index.samples.size(); ++i) by_class[index.samples[i].label].push_back(i);

    std::vector<std::vector<std::size_t>> members(3);
    for (std::size_t label = 0; label < by_class.size(); ++label) {
        auto& items = by_class[label];
        CounterRng rng(derive_key({spec.seed, label, 0x73706c74}));
        shuffle(std::span<std::size_t>(items), rng);
        const auto counts = apportion(items.size(), ratios);
        std::size_t pos = 0;
        for (std::size_t s = 0; s < 3; ++s) {
            for (std::size_t k = 0; k < counts[s]; ++k) members[s].push_back(items[pos++]);
            views[s]->counts[label] = counts[s];
            if (counts[s] == 0 && ratios[s] > 0 && items.size() >= 3) {
                out.warnings.push_back(std::string(names[s]) + " split received no samples of class '" +
                                       index.class_names[label] + "'");
            }
        }
    }
    for (std::size_t s = 0; s < 3; ++s) {
        std::sort(members[s].begin(), members[s].end());
        for (auto i : members[s]) views[s]->samples.push_back(index.samples[i]);
    }
    return out;
}

std::vector<std::vector<std::size_t>> batch_order(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                  std::uint64_t epoch) {
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    CounterRng rng(derive_key({seed, epoch, 0x62617463}));
    shuffle(std::span<std::size_t>(order), rng);

    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < count; start += batch_size) {
        const std::size_t end = std::min(count, start + batch_size);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

ImageCache::ImageCache(std::size_t height, std::size_t width, std::size_t max_bytes)
    : height_(height), width_(width), max_bytes_(max_bytes) {}

Tensor ImageCache::get(const fs::path& path) {
    if (auto it = entries_.find(path); it != entries_.end()) return it->second;
    Tensor t = load_image(path, height_, width_);
    const std::size_t bytes = t.size() * sizeof(Scalar);
    if (used_bytes_ + bytes <= max_bytes_) {
        used_bytes_ += bytes;
        entries_.emplace(path, t);
    }
    return t;
}

Batch make_batch(const DatasetIndex& view, const std::vector<std::size_t>& positions, ImageCache& cache) {
    if (positions.empty()) throw ShapeError("make_batch: empty batch");
    const std::size_t plane = 3 * cache.height() * cache.width();
    Batch b;
    b.images = Tensor({positions.size(), 3, cache.height(), cache.width()});
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const auto& sample = view.samples.at(positions[i]);
        const Tensor img = cache.get(sample.path);
        std::copy(img.data().begin(), img.data().end(), b.images.data().begin() + static_cast<std::ptrdiff_t>(i * plane));
        b.labels.push_back(sample.label);
        b.sources.push_back(positions[i]);
    }
    return b;
}

std::vector<Batch> batches(const DatasetIndex& view, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch,
                           ImageCache& cache) {
    std::vector<Batch> out;
    for (const auto& positions : batch_order(view.size(), batch_size, seed, epoch))
        out.push_back(make_batch(view, positions, cache));
    return out;
}

}  // namespace hemocnn
