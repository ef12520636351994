#include "asymkd/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace asymkd {

namespace {

void put_u32_le(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void write_matrix_f32(const std::filesystem::path& path, const std::vector<Vec>& rows) {
    const uint32_t r = static_cast<uint32_t>(rows.size());
    const uint32_t c = rows.empty() ? 0 : static_cast<uint32_t>(rows.front().size());
    std::string buf;
    buf.reserve(8 + static_cast<size_t>(r) * c * 4);
    put_u32_le(buf, r);
    put_u32_le(buf, c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ConfigError("write_matrix_f32: ragged rows");
        for (double x : row) put_u32_le(buf, std::bit_cast<uint32_t>(static_cast<float>(x)));
    }
    write_text_file(path, buf);
}

std::vector<Vec> read_matrix_f32(const std::filesystem::path& path) {
    const std::string buf = read_text_file(path);
    if (buf.size() < 8) throw ConfigError("read_matrix_f32: truncated header in " + path.string());
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    const uint32_t r = get_u32_le(p);
    const uint32_t c = get_u32_le(p + 4);
    if (buf.size() != 8 + static_cast<size_t>(r) * c * 4)
        throw ConfigError("read_matrix_f32: size mismatch in " + path.string());
    std::vector<Vec> rows(r, Vec(c));
    size_t off = 8;
    for (uint32_t i = 0; i < r; ++i)
        for (uint32_t j = 0; j < c; ++j, off += 4)
            rows[i][j] = static_cast<double>(std::bit_cast<float>(get_u32_le(p + off)));
    return rows;
}

void quantize_f32(Vec& v) {
    for (double& x : v) x = quantize_f32(x);
}

uint64_t fnv1a64(const void* data, size_t size, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string to_hex(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
    return s;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("write failed for " + path.string());
}

}  // namespace asymkd
