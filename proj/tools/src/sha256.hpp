#pragma once

#include <string>

namespace rpolab::cli {

// Lowercase hex SHA-256 of the byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace rpolab::cli
