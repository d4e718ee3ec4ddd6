#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hemocnn {

struct SynthOptions {
    std::size_t classes = 8;
    std::size_t per_class = 20;
    std::size_t image_size = 100;
    std::uint64_t seed = 0;
};

struct SynthResult {
    std::vector<std::filesystem::path> files;  // relative to the output root
    std::filesystem::path manifest;
};

/// Folder name for class k, zero padded so lexicographic order equals id order.
std::string synth_class_name(std::size_t k, std::size_t classes);

/// The dominant (background) colour of class k.
std::array<std::uint8_t, 3> synth_class_color(std::size_t k, std::size_t classes);

/// Writes `<out>/<class>/img_NNNN.png` images: the saturated class colour as
/// background, a paler blob of the same hue at a jittered position, and
/// per-pixel noise.
/// Also writes `<out>/manifest.tsv` ("<relative path>\t<class id>" per line).
/// Throws DataError when the directory cannot be written.
SynthResult synth_dataset(const std::filesystem::path& out_dir, const SynthOptions& opts);

}  // namespace hemocnn
