#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace eigengp {

/// Lowercase hex SHA-256.
std::string sha256_hex(const void *data, std::size_t size);

inline std::string sha256_hex(std::string_view bytes) {
  return sha256_hex(bytes.data(), bytes.size());
}

} // namespace eigengp
