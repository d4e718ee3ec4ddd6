#include "hemocnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "hemocnn/errors.hpp"
#include "hemocnn/image_io.hpp"
#include "hemocnn/rng.hpp"

namespace fs = std::filesystem;

namespace hemocnn {

namespace {

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    const double c = v * s;
    const double hp = std::fmod(h, 360.0) / 60.0;
    const double x = c * (1 - std::abs(std::fmod(hp, 2.0) - 1));
    double r = 0, g = 0, b = 0;
    if (hp < 1) r = c, g = x;
    else if (hp < 2) r = x, g = c;
    else if (hp < 3) g = c, b = x;
    else if (hp < 4) g = x, b = c;
    else if (hp < 5) r = x, b = c;
    else r = c, b = x;
    const double m = v - c;
    return {(r + m) * 255, (g + m) * 255, (b + m) * 255};
}

double hue_of(std::size_t k, std::size_t classes) { return 360.0 * static_cast<double>(k) / static_cast<double>(classes); }

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

std::string synth_class_name(std::size_t k, std::size_t classes) {
    const int width = std::max<int>(2, static_cast<int>(std::to_string(classes - 1).size()));
    char buf[32];
    std::snprintf(buf, sizeof buf, "class_%0*zu", width, k);
    return buf;
}

std::array<std::uint8_t, 3> synth_class_color(std::size_t k, std::size_t classes) {
    const auto c = hsv_to_rgb(hue_of(k, classes), 0.85, 0.9);
    return {to_byte(c[0]), to_byte(c[1]), to_byte(c[2])};
}

SynthResult synth_dataset(const fs::path& out_dir, const SynthOptions& opts) {
    if (opts.classes < 1 || opts.per_class < 1 || opts.image_size < 1) {
        throw ConfigError("synth: classes, per_class and image_size must be >= 1");
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError(DataError::Kind::Io, "cannot create '" + out_dir.string() + "': " + ec.message());

    const std::size_t n = opts.image_size;
    const double size = static_cast<double>(n);
    SynthResult result;

    for (std::size_t k = 0; k < opts.classes; ++k) {
        const std::string cname = synth_class_name(k, opts.classes);
        fs::create_directories(out_dir / cname, ec);
        if (ec) throw DataError(DataError::Kind::Io, "cannot create class folder: " + ec.message());

        // The class colour fills the background; the blob is a paler shade of the same hue.
        const auto dominant = hsv_to_rgb(hue_of(k, opts.classes), 0.85, 0.9);
        const auto blob = hsv_to_rgb(hue_of(k, opts.classes), 0.6, 1.0);

        for (std::size_t i = 0; i < opts.per_class; ++i) {
            CounterRng rng(derive_key({opts.seed, k, i, 0x73796e}));
            const double cx = size * (0.5 + rng.uniform(-0.1, 0.1));
            const double cy = size * (0.5 + rng.uniform(-0.1, 0.1));
            const double radius = size * rng.uniform(0.25, 0.33);

            Image8 img{n, n, std::vector<std::uint8_t>(n * n * 3)};
            for (std::size_t y = 0; y < n; ++y) {
                for (std::size_t x = 0; x < n; ++x) {
                    const double dx = static_cast<double>(x) + 0.5 - cx;
                    const double dy = static_cast<double>(y) + 0.5 - cy;
                    const bool inside = dx * dx + dy * dy <= radius * radius;
                    const auto& base = inside ? blob : dominant;
                    for (std::size_t c = 0; c < 3; ++c) img.px(y, x, c) = to_byte(base[c] + rng.uniform(-12, 12));
                }
            }

            char fname[32];
            std::snprintf(fname, sizeof fname, "img_%04zu.png", i);
            const fs::path rel = fs::path(cname) / fname;
            write_png(out_dir / rel, img);
            result.files.push_back(rel);
        }
    }

    result.manifest = out_dir / "manifest.tsv";
    std::ofstream manifest(result.manifest, std::ios::binary | std::ios::trunc);
    if (!manifest) throw DataError(DataError::Kind::Io, "cannot write '" + result.manifest.string() + "'");
    for (std::size_t f = 0; f < result.files.size(); ++f) {
        manifest << result.files[f].generic_string() << '\t' << f / opts.per_class << '\n';
    }
    if (!manifest) throw DataError(DataError::Kind::Io, "short write to manifest");
    return result;
}

}  // namespace hemocnn
