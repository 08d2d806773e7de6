#pragma once

#include <string>
#include <string_view>

namespace kgu {

// Lowercase hex SHA-256 digest. Self-contained so artifact hashing does not
// pull in a crypto library for what is only a staleness check.
std::string sha256_hex(std::string_view data);

}  // namespace kgu
