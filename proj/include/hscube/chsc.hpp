#pragma once

// CHSC binary cube format, version 1 (all fields little-endian):
//   "CHSC" | u32 version | u32 N (rows) | u32 M (cols) | u32 L (bands)
//   | L x f64 wavelengths (nm) | N*M*L x (f64 re, f64 im), band-major, then row, then column

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "cube.hpp"

namespace hscube::chsc {

inline constexpr std::array<char, 4> kMagic{'C', 'H', 'S', 'C'};
inline constexpr std::uint32_t       kVersion    = 1;
inline constexpr std::size_t         kHeaderSize = 4 + 4 * 4;

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFFu));
    }
}

inline void put_f64(std::vector<unsigned char>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xFFu));
    }
}

inline std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return v;
}

inline double get_f64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return std::bit_cast<double>(v);
}

} // namespace detail

[[nodiscard]] inline std::vector<unsigned char> encode(const ComplexCube& cube) {
    std::vector<unsigned char> out;
    out.reserve(kHeaderSize + 8 * cube.n_bands() + 16 * cube.data().size());
    out.insert(out.end(), kMagic.begin(), kMagic.end());
    detail::put_u32(out, kVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(cube.n_rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(cube.n_cols()));
    detail::put_u32(out, static_cast<std::uint32_t>(cube.n_bands()));
    for (double w : cube.wavelengths()) {
        detail::put_f64(out, w);
    }
    for (const auto& v : cube.data()) {
        detail::put_f64(out, v.real());
        detail::put_f64(out, v.imag());
    }
    return out;
}

[[nodiscard]] inline ComplexCube decode(std::span<const unsigned char> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
        throw Error(ErrorCode::BadMagic, "not a CHSC file");
    }
    if (bytes.size() < kHeaderSize) {
        throw Error(ErrorCode::TruncatedPayload, "header is incomplete");
    }
    const std::uint32_t version = detail::get_u32(bytes.data() + 4);
    if (version != kVersion) {
        throw Error(ErrorCode::UnsupportedVersion, "CHSC version " + std::to_string(version));
    }
    const std::size_t n_rows  = detail::get_u32(bytes.data() + 8);
    const std::size_t n_cols  = detail::get_u32(bytes.data() + 12);
    const std::size_t n_bands = detail::get_u32(bytes.data() + 16);

    const std::size_t n_samples = n_rows * n_cols * n_bands;
    const std::size_t expected  = kHeaderSize + 8 * n_bands + 16 * n_samples;
    if (bytes.size() < expected) {
        throw Error(ErrorCode::TruncatedPayload, "expected " + std::to_string(expected) + " bytes, found " + std::to_string(bytes.size()));
    }

    const unsigned char* p = bytes.data() + kHeaderSize;
    std::vector<double>  wavelengths(n_bands);
    for (auto& w : wavelengths) {
        w = detail::get_f64(p);
        p += 8;
    }
    std::vector<cdouble> data(n_samples);
    for (auto& v : data) {
        v = {detail::get_f64(p), detail::get_f64(p + 8)};
        p += 16;
    }
    return ComplexCube(n_rows, n_cols, std::move(wavelengths), std::move(data));
}

inline void write_cube(const ComplexCube& cube, const std::filesystem::path& path) {
    const auto    bytes = encode(cube);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    }
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) {
        throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
    }
}

[[nodiscard]] inline ComplexCube read_cube(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return decode(bytes);
}

} // namespace hscube::chsc
