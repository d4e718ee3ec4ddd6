#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hemocnn/network.hpp"

namespace hemocnn {

// On-disk layout (all integers little-endian):
//   "PBCN" | u32 version | u32 n + n bytes UTF-8 JSON {"config":..., "meta":...}
//   then per parameter in build order:
//   u16 n + name | u8 rank | rank x u32 extents | f32 payload
// Weights are always stored as 32-bit floats, so a double-precision network
// is narrowed on save.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    std::uint64_t epoch = 0;
    std::string monitored = "val_loss";
    std::optional<double> monitored_loss;
    std::vector<std::string> class_names;
    // How the dataset was partitioned for training, so evaluation can
    // reproduce the same split.
    std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
    std::uint64_t split_seed = 0;
    bool eval_on_all = false;

    bool operator==(const CheckpointMeta&) const = default;
};

struct LoadedCheckpoint {
    Network network;
    CheckpointMeta meta;
};

std::vector<std::uint8_t> serialize_checkpoint(const Network& net, const CheckpointMeta& meta);
LoadedCheckpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes atomically (temp file + rename).
void save_checkpoint(const Network& net, const CheckpointMeta& meta, const std::filesystem::path& path);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Rounds every weight to the nearest 32-bit float, the precision a
/// checkpoint preserves.
void narrow_to_storage_precision(Network& net);

}  // namespace hemocnn
