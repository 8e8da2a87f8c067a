#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

namespace gluscope {

template <typename T>
    requires std::is_unsigned_v<T>
void put_le(std::vector<std::uint8_t>& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
    requires std::is_unsigned_v<T>
T get_le(const std::uint8_t* p) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
    return v;
}

std::string read_file(const std::filesystem::path& path);

// Writes via a temporary sibling and renames, so readers never see a partial file.
void write_file(const std::filesystem::path& path, const std::string& contents);

} // namespace gluscope
