#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "asymkd/geometry.hpp"

namespace asymkd {

/// Row-major little-endian float32 matrix with an 8-byte header
/// (two little-endian uint32: rows, cols).
void write_matrix_f32(const std::filesystem::path& path, const std::vector<Vec>& rows);
std::vector<Vec> read_matrix_f32(const std::filesystem::path& path);

/// Round a double through float32, so in-memory values match what the
/// f32 formats store and round-trips are bit-exact.
inline double quantize_f32(double x) { return static_cast<double>(static_cast<float>(x)); }
void quantize_f32(Vec& v);

uint64_t fnv1a64(const void* data, size_t size, uint64_t seed = 0xcbf29ce484222325ull);
std::string to_hex(uint64_t v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace asymkd
