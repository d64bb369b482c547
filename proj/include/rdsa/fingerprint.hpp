#pragma once

#include <filesystem>
#include <string>

#include "rdsa/dataset.hpp"

namespace rdsa {

// SHA-256 of a byte buffer, hex-encoded.
std::string sha256_hex(const void* data, std::size_t len);

// Content hash of a dataset: feature bytes, labels, meta and class count.
// Used to verify that pipeline stages leave splits untouched.
std::string dataset_fingerprint(const Dataset& d);

std::string file_fingerprint(const std::filesystem::path& path);

}  // namespace rdsa
