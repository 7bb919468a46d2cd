#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace flowae::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::string read_file(const std::filesystem::path& path);

/// Writes `contents` to `path.tmp` and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Splits one CSV record. Handles double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view field);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Strict parse of a full cell as a double; false on trailing junk or empty input.
bool parse_double(std::string_view text, double& out);

/// Little-endian append-only byte buffer.
class ByteWriter {
public:
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void f32(float v) { raw(&v, sizeof v); }
    void u8(std::uint8_t v) { raw(&v, sizeof v); }
    void str(std::string_view s);
    void raw(const void* data, std::size_t n);
    const std::string& bytes() const { return buffer_; }

private:
    std::string buffer_;
};

/// Bounds-checked reader over a byte buffer; throws FormatError on truncation.
class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    float f32();
    std::uint8_t u8();
    std::string str();
    void raw(void* out, std::size_t n);
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

/// FNV-1a 64-bit.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);

}  // namespace flowae::io
