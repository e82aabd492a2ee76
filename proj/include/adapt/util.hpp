#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

namespace adapt {

// FNV-1a, 64-bit. Stable across platforms; used for model checksums and
// config hashes embedded in output files.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v);

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view text);

}  // namespace adapt
