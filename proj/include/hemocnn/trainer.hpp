#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hemocnn/dataset.hpp"
#include "hemocnn/network.hpp"

namespace hemocnn {

struct TrainConfig {
    std::filesystem::path data_dir;
    std::size_t epochs = 150;
    double learning_rate = 0.001;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    SplitSpec split{0.8, 0.1, 0.1, 0};
    std::filesystem::path checkpoint = "hemocnn.ckpt";
    std::filesystem::path metrics_log = "metrics.jsonl";

    // Architecture knobs; num_classes always comes from the dataset.
    std::size_t input_size = 100;
    std::vector<std::size_t> conv_filters{32, 64, 64, 128, 256, 256, 256, 512};
    std::vector<std::size_t> dense_hidden{128, 128, 128, 128, 128};
    std::size_t pool_stride = 2;
    bool pool_ceil = true;
    double dropout_rate = 0.25;
    bool literal_paper = false;  // forces stride-1 exact pooling

    bool eval_on_all = false;    // train and evaluate on every sample
    bool log_wall_time = false;  // adds wall_seconds to the metrics log (breaks byte-identical logs)

    /// Throws ConfigError when epochs, learning rate or batch size are invalid.
    void validate() const;

    NetConfig net_config(std::size_t num_classes) const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0;
    double train_accuracy = 0;
    std::optional<double> val_loss;
    std::optional<double> val_accuracy;
    double wall_seconds = 0;
};

nlohmann::json to_json(const EpochRecord& r, bool with_wall_time);

struct TrainResult {
    std::vector<EpochRecord> records;
    std::size_t best_epoch = 0;
    double best_loss = 0;
    std::string monitored;  // "val_loss" or "train_loss"
    double initial_loss = 0;
    std::vector<std::string> class_names;
};

/// Scans the dataset, builds the network, runs the epoch loop and saves the
/// checkpoint whenever the monitored loss improves. Progress lines go to `log`.
/// Throws NumericError naming the epoch/batch if the loss becomes non-finite.
TrainResult train(const TrainConfig& cfg, std::ostream& log);

struct EvalResult {
    double loss = 0;
    double accuracy = 0;
    std::vector<std::size_t> truth;
    std::vector<std::size_t> predicted;
};

/// Inference pass over a view in fixed (unshuffled) order.
EvalResult evaluate(const Network& net, const DatasetIndex& view, ImageCache& cache, std::size_t batch_size = 32);

}  // namespace hemocnn
