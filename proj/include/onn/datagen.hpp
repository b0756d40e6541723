#pragma once

// Desk-scale synthetic datasets for the four experiment kinds, plus the
// dataset manifest (dataset.json) loader. Generated files are deterministic
// functions of (kind, seed, size, count): byte-identical across reruns.
//
// Regression inputs/targets are persisted in the lossless raw matrix format
// (quantizing a noisy image to 8 bits would disturb its calibrated SNR);
// preview PGMs are written next to them. Segmentation masks are exact in
// 8-bit PGM ({0, 255} -> {-1, +1}).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "onn/dataset.hpp"
#include "onn/errors.hpp"
#include "onn/image_io.hpp"
#include "onn/map2d.hpp"
#include "onn/metrics.hpp"
#include "onn/rng.hpp"

namespace onn {

namespace patterns {

inline Map2D checkerboard(int size, int period, double lo = -1.0, double hi = 1.0) {
    Map2D m(size, size);
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c)
            m(r, c) = ((r / period + c / period) % 2 == 0) ? hi : lo;
    return m;
}

inline Map2D stripes(int size, double angle, double wavelength, double phase) {
    Map2D m(size, size);
    const double kx = std::cos(angle) * 6.283185307179586 / wavelength;
    const double ky = std::sin(angle) * 6.283185307179586 / wavelength;
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c)
            m(r, c) = std::sin(kx * r + ky * c + phase);
    return m;
}

inline Map2D rings(int size, double cx, double cy, double wavelength, double phase) {
    Map2D m(size, size);
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            const double d = std::hypot(r - cx, c - cy);
            m(r, c) = std::sin(6.283185307179586 * d / wavelength + phase);
        }
    return m;
}

inline Map2D gradient(int size, double angle) {
    Map2D m(size, size);
    const double gx = std::cos(angle);
    const double gy = std::sin(angle);
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            const double u = (gx * r + gy * c) / (size - 1);
            m(r, c) = 2.0 * (u - std::floor(u)) - 1.0;
        }
    return m;
}

inline Map2D disk_mask(int size, double cx, double cy, double radius) {
    Map2D m(size, size);
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c)
            m(r, c) = std::hypot(r - cx, c - cy) <= radius ? 1.0 : -1.0;
    return m;
}

// Rotates through the texture family for target images.
inline Map2D target_texture(int index, int size, Rng& rng) {
    const double phase = rng.next_uniform(0.0, 6.28);
    switch (index % 4) {
    case 0:
        return stripes(size, rng.next_uniform(0.0, 3.14), size / 3.0 + rng.next_unit(), phase);
    case 1:
        return rings(size, rng.next_uniform(0.0, size), rng.next_uniform(0.0, size),
                     size / 3.0 + rng.next_unit(), phase);
    case 2:
        return checkerboard(size, std::max(2, size / 4));
    default:
        return gradient(size, rng.next_uniform(0.0, 3.14));
    }
}

} // namespace patterns

namespace detail {

inline Map2D gaussian_map(int size, Rng& rng) {
    Map2D m(size, size);
    for (double& v : m.data)
        v = rng.next_gaussian();
    return m;
}

// Eq.-style normalization by the image's own extremes; attains both +-1.
inline Map2D normalize_by_extremes(const Map2D& m) {
    double lo = m.data[0], hi = m.data[0];
    for (double v : m.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return normalize(m, lo, hi);
}

struct ManifestItem {
    std::string id, input, target;
    bool mask = false;
};

inline void write_manifest(const std::filesystem::path& dir, const std::string& kind,
                           const std::vector<ManifestItem>& items) {
    nlohmann::json j;
    j["format"] = "onn-dataset";
    j["version"] = 1;
    j["kind"] = kind;
    j["items"] = nlohmann::json::array();
    for (const auto& it : items)
        j["items"].push_back(
            {{"id", it.id}, {"input", it.input}, {"target", it.target}, {"mask", it.mask}});
    std::ofstream f(dir / "dataset.json", std::ios::binary);
    if (!f)
        throw IOError("cannot write dataset manifest in " + dir.string());
    f << j.dump(2) << "\n";
}

inline std::string item_name(int i) {
    std::ostringstream os;
    os << "item" << (i < 10 ? "0" : "") << i;
    return os.str();
}

} // namespace detail

struct MakeDataOptions {
    int size = 16;
    int count = 4;
};

// Clean texture targets with inputs corrupted by Gaussian white noise scaled
// so every input measures exactly 0 dB against its target (noise variance
// matched to the signal variance).
inline void make_denoise(const std::string& dir, std::uint64_t seed, const MakeDataOptions& opt) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<detail::ManifestItem> items;
    for (int i = 0; i < opt.count; ++i) {
        Rng rng(mix_seed(seed, 100 + i));
        Map2D clean = patterns::target_texture(i, opt.size, rng);
        Map2D noise = detail::gaussian_map(opt.size, rng);
        const double scale = std::sqrt(variance(clean) / variance(noise));
        Map2D noisy = clean;
        for (int j = 0; j < noisy.size(); ++j)
            noisy.data[j] += scale * noise.data[j];

        const std::string name = detail::item_name(i);
        write_raw(dir + "/" + name + ".input.raw", noisy);
        write_raw(dir + "/" + name + ".target.raw", clean);
        write_pgm(dir + "/" + name + ".input.pgm", noisy);
        write_pgm(dir + "/" + name + ".target.pgm", clean);
        items.push_back({name, name + ".input.raw", name + ".target.raw", false});
    }
    detail::write_manifest(dir, "denoise", items);
}

// White-noise inputs paired with texture targets: the synthesis task.
inline void make_synth(const std::string& dir, std::uint64_t seed, const MakeDataOptions& opt) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<detail::ManifestItem> items;
    for (int i = 0; i < opt.count; ++i) {
        Rng rng(mix_seed(seed, 200 + i));
        Map2D input = detail::normalize_by_extremes(detail::gaussian_map(opt.size, rng));
        Map2D target = patterns::target_texture(i, opt.size, rng);

        const std::string name = detail::item_name(i);
        write_raw(dir + "/" + name + ".input.raw", input);
        write_raw(dir + "/" + name + ".target.raw", target);
        write_pgm(dir + "/" + name + ".input.pgm", input);
        write_pgm(dir + "/" + name + ".target.pgm", target);
        items.push_back({name, name + ".input.raw", name + ".target.raw", false});
    }
    detail::write_manifest(dir, "synth", items);
}

// Shape images with strictly binary masks.
inline void make_segment(const std::string& dir, std::uint64_t seed, const MakeDataOptions& opt) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<detail::ManifestItem> items;
    for (int i = 0; i < opt.count; ++i) {
        Rng rng(mix_seed(seed, 300 + i));
        const double cx = rng.next_uniform(opt.size * 0.3, opt.size * 0.7);
        const double cy = rng.next_uniform(opt.size * 0.3, opt.size * 0.7);
        const double radius = rng.next_uniform(opt.size * 0.15, opt.size * 0.35);
        Map2D mask = patterns::disk_mask(opt.size, cx, cy, radius);
        Map2D image(opt.size, opt.size);
        for (int j = 0; j < image.size(); ++j)
            image.data[j] = 0.55 * mask.data[j] + 0.25 * rng.next_gaussian();
        image = detail::normalize_by_extremes(image);

        const std::string name = detail::item_name(i);
        write_pgm(dir + "/" + name + ".input.pgm", image);
        write_pgm(dir + "/" + name + ".mask.pgm", mask);
        items.push_back({name, name + ".input.pgm", name + ".mask.pgm", true});
    }
    detail::write_manifest(dir, "segment", items);
}

// Texture-to-texture pairs; consecutive items form forward/inverse pairs
// (item 2k maps A->B, item 2k+1 maps B->A).
inline void make_transform(const std::string& dir, std::uint64_t seed, const MakeDataOptions& opt) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<detail::ManifestItem> items;
    for (int i = 0; i < opt.count; i += 2) {
        Rng rng(mix_seed(seed, 400 + i));
        Map2D a = patterns::target_texture(i, opt.size, rng);
        Map2D b = patterns::target_texture(i + 1, opt.size, rng);
        for (int half = 0; half < 2 && i + half < opt.count; ++half) {
            const Map2D& in = half == 0 ? a : b;
            const Map2D& out = half == 0 ? b : a;
            const std::string name = detail::item_name(i + half);
            write_raw(dir + "/" + name + ".input.raw", in);
            write_raw(dir + "/" + name + ".target.raw", out);
            write_pgm(dir + "/" + name + ".input.pgm", in);
            write_pgm(dir + "/" + name + ".target.pgm", out);
            items.push_back({name, name + ".input.raw", name + ".target.raw", false});
        }
    }
    detail::write_manifest(dir, "transform", items);
}

inline void make_dataset(const std::string& kind, const std::string& dir, std::uint64_t seed,
                         const MakeDataOptions& opt = {}) {
    if (opt.size < 4 || opt.count < 1)
        throw InputError("make_dataset: need size >= 4 and count >= 1");
    if (kind == "denoise")
        make_denoise(dir, seed, opt);
    else if (kind == "synth")
        make_synth(dir, seed, opt);
    else if (kind == "segment")
        make_segment(dir, seed, opt);
    else if (kind == "transform")
        make_transform(dir, seed, opt);
    else
        throw InputError("unknown dataset kind: " + kind +
                         " (want denoise|synth|segment|transform)");
}

namespace detail {

inline Map2D load_map(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".raw")
        return read_raw(path.string());
    if (ext == ".pgm")
        return read_pgm_normalized(path.string());
    throw IOError("unsupported map file type: " + path.string());
}

} // namespace detail

inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path manifest = fs::path(dir) / "dataset.json";
    std::ifstream f(manifest, std::ios::binary);
    if (!f)
        throw IOError("cannot open dataset manifest: " + manifest.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IOError(std::string("malformed dataset manifest: ") + e.what());
    }
    Dataset data;
    try {
        for (const auto& it : j.at("items")) {
            DatasetPair pair;
            pair.id = it.at("id").get<std::string>();
            pair.input.push_back(detail::load_map(fs::path(dir) / it.at("input").get<std::string>()));
            pair.target.push_back(
                detail::load_map(fs::path(dir) / it.at("target").get<std::string>()));
            pair.target_is_mask = it.at("mask").get<bool>();
            if (pair.target_is_mask)
                for (double v : pair.target.front().data)
                    if (v != 1.0 && v != -1.0)
                        throw InputError("dataset item " + pair.id +
                                         ": mask is not strictly binary");
            data.push_back(std::move(pair));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IOError(std::string("malformed dataset manifest: ") + e.what());
    }
    if (data.empty())
        throw InputError("dataset is empty: " + dir);
    for (const auto& item : data)
        if (!item.input.front().same_dims(data.front().input.front()))
            throw DimensionError("dataset items have inconsistent dims");
    return data;
}

} // namespace onn
