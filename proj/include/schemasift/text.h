#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace schemasift {

/// ASCII lower-casing; identifiers and search terms are folded with this.
std::string to_lower(std::string_view s);

bool iequals(std::string_view a, std::string_view b);

/// Lower-cased alphanumeric runs. Every other byte is a separator; bytes >= 0x80 are kept so
/// UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

/// 64-bit FNV-1a with a salt mixed into the offset basis. Stable across platforms.
uint64_t fnv1a64(std::string_view data, uint64_t salt = 0);

/// Splitmix64 finalizer, used to decorrelate hash bits.
uint64_t mix64(uint64_t x);

std::string trim(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

}  // namespace schemasift
