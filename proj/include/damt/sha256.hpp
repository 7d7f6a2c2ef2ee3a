#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace damt {

// Hex digest of a byte buffer (OpenSSL EVP under the hood).
std::string sha256_hex(const void* data, size_t len);

}  // namespace damt
