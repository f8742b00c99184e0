#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "grid.hpp"

namespace vortexiter {

// VF3D: "VF3D", u32 version=1, u32 n, u32 components, f64 time, then
// components*n^3 f64 values (component-major, x3 fastest). Little-endian throughout.
struct FieldSnapshot {
    PeriodicVectorField field;
    double time = 0.0;
};

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U u = std::bit_cast<U>(v);
    unsigned char b[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(const unsigned char* b) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= U(b[i]) << (8 * i);
    return std::bit_cast<T>(u);
}

}  // namespace detail

inline void write_field(const PeriodicVectorField& f, double time, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open '" + path + "' for writing");
    os.write("VF3D", 4);
    detail::put_le<std::uint32_t>(os, 1u);
    detail::put_le<std::uint32_t>(os, std::uint32_t(f.grid().n));
    detail::put_le<std::uint32_t>(os, std::uint32_t(f.components()));
    detail::put_le<double>(os, time);
    for (double v : f.data()) detail::put_le<double>(os, v);
    if (!os) throw FormatError("write to '" + path + "' failed");
}

inline FieldSnapshot read_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
    constexpr std::size_t header = 4 + 4 + 4 + 4 + 8;
    if (bytes.size() < header) throw FormatError(path + ": truncated header (" + std::to_string(bytes.size()) + " bytes)");
    if (std::memcmp(b, "VF3D", 4) != 0) throw FormatError(path + ": bad magic, expected VF3D");
    const auto version = detail::get_le<std::uint32_t>(b + 4);
    if (version != 1) throw FormatError(path + ": unsupported version " + std::to_string(version));
    const auto n = detail::get_le<std::uint32_t>(b + 8);
    const auto comps = detail::get_le<std::uint32_t>(b + 12);
    const double time = detail::get_le<double>(b + 16);
    if (n < 4 || n % 2 != 0 || n > 4096) throw FormatError(path + ": invalid grid size " + std::to_string(n));
    if (comps != 1 && comps != 3 && comps != 9)
        throw FormatError(path + ": invalid component count " + std::to_string(comps));
    const std::size_t count = std::size_t(comps) * n * n * n;
    if (bytes.size() != header + 8 * count)
        throw FormatError(path + ": body has " + std::to_string(bytes.size() - header) + " bytes, expected " +
                          std::to_string(8 * count) + (bytes.size() < header + 8 * count ? " (truncated)" : ""));
    FieldSnapshot snap{PeriodicVectorField(GridSpec(int(n)), int(comps)), time};
    auto& d = snap.field.data();
    for (std::size_t i = 0; i < count; ++i) d[i] = detail::get_le<double>(b + header + 8 * i);
    return snap;
}

}  // namespace vortexiter
