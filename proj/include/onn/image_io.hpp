#pragma once

// Image and matrix file I/O:
//   - 8-bit binary PGM (P5, maxval 255) for portable grayscale images;
//   - a raw little-endian float64 matrix format ("ONNR" magic, u32 rows,
//     u32 cols, then rows*cols doubles) for lossless maps.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "onn/errors.hpp"
#include "onn/map2d.hpp"
#include "onn/metrics.hpp"

namespace onn {

// Quantizes a [-1, 1] map to 8-bit and writes it as binary PGM.
inline void write_pgm(const std::string& path, const Map2D& map) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IOError("cannot open for writing: " + path);
    f << "P5\n" << map.cols << " " << map.rows << "\n255\n";
    std::vector<unsigned char> bytes(static_cast<std::size_t>(map.size()));
    for (int i = 0; i < map.size(); ++i) {
        const double v = (map.data[i] + 1.0) * 127.5;
        const long q = std::lround(v);
        bytes[static_cast<std::size_t>(i)] =
            static_cast<unsigned char>(q < 0 ? 0 : (q > 255 ? 255 : q));
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f)
        throw IOError("write failed: " + path);
}

namespace detail {

inline int next_pgm_token(std::istream& in) {
    // Skips whitespace and '#' comments, returns the next integer token.
    while (true) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value))
        throw IOError("malformed PGM header");
    return value;
}

} // namespace detail

// Reads a binary PGM into a map of raw 0..255 values.
inline Map2D read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IOError("cannot open image file: " + path);
    std::string magic(2, '\0');
    f.read(magic.data(), 2);
    if (magic != "P5")
        throw IOError("unsupported image format (want binary PGM P5): " + path);
    const int cols = detail::next_pgm_token(f);
    const int rows = detail::next_pgm_token(f);
    const int maxval = detail::next_pgm_token(f);
    if (maxval != 255)
        throw IOError("unsupported PGM maxval (want 255): " + path);
    f.get(); // single whitespace after maxval
    std::vector<unsigned char> bytes(static_cast<std::size_t>(rows) * cols);
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f)
        throw IOError("truncated PGM payload: " + path);
    Map2D map(rows, cols);
    for (int i = 0; i < map.size(); ++i)
        map.data[i] = static_cast<double>(bytes[static_cast<std::size_t>(i)]);
    return map;
}

// Reads a PGM and normalizes by the 8-bit container range into [-1, 1].
inline Map2D read_pgm_normalized(const std::string& path) {
    return normalize(read_pgm(path), 0.0, 255.0);
}

inline constexpr char kRawMagic[4] = {'O', 'N', 'N', 'R'};

inline void write_raw(const std::string& path, const Map2D& map) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IOError("cannot open for writing: " + path);
    f.write(kRawMagic, 4);
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(map.rows),
                                   static_cast<std::uint32_t>(map.cols)};
    f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    f.write(reinterpret_cast<const char*>(map.data.data()),
            static_cast<std::streamsize>(map.data.size() * sizeof(double)));
    if (!f)
        throw IOError("write failed: " + path);
}

inline Map2D read_raw(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IOError("cannot open matrix file: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kRawMagic, 4) != 0)
        throw IOError("not a raw matrix file: " + path);
    std::uint32_t dims[2];
    f.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!f || dims[0] == 0 || dims[1] == 0)
        throw IOError("bad raw matrix header: " + path);
    Map2D map(static_cast<int>(dims[0]), static_cast<int>(dims[1]));
    f.read(reinterpret_cast<char*>(map.data.data()),
           static_cast<std::streamsize>(map.data.size() * sizeof(double)));
    if (!f)
        throw IOError("truncated raw matrix payload: " + path);
    if (!map.all_finite())
        throw NumericError("raw matrix contains non-finite values: " + path);
    return map;
}

} // namespace onn
