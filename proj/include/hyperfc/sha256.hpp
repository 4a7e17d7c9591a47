#ifndef HYPERFC_SHA256_HPP
#define HYPERFC_SHA256_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace hyperfc {

// FIPS 180-4 SHA-256, returns the digest as a lowercase hex string.
std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::vector<uint8_t>& data);

// Digest of a tensor list's raw 64-bit payloads in order (parameter
// fingerprints, e.g. for freeze checks).
std::string sha256_of_doubles(const std::vector<std::vector<double>>& buffers);

} // namespace hyperfc

#endif
