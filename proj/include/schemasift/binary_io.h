#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace schemasift {

/// Appends fixed-width little-endian values regardless of host byte order.
class ByteWriter {
   public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u32(uint32_t v);
    void u64(uint64_t v);
    void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
    void f32(float v);
    void f64(double v);
    /// u32 length prefix followed by the raw bytes.
    void str(std::string_view s);
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

    const std::string& data() const { return buf_; }
    std::string take() { return std::move(buf_); }

   private:
    std::string buf_;
};

/// Bounds-checked reader; any overrun throws Corruption.
class ByteReader {
   public:
    explicit ByteReader(std::string_view data) : data_(data) {}

    uint8_t u8();
    uint32_t u32();
    uint64_t u64();
    int32_t i32() { return static_cast<int32_t>(u32()); }
    float f32();
    double f64();
    std::string str();
    std::string_view bytes(size_t n);

    bool done() const { return pos_ == data_.size(); }
    size_t remaining() const { return data_.size() - pos_; }

   private:
    std::string_view data_;
    size_t pos_ = 0;
};

uint32_t crc32(std::string_view data);

/// Framing shared by every artifact file:
///
///   magic[8] | u32 version | u32 section count |
///   { tag[4] | u64 length | payload }* | u32 crc32 of everything before it
///
/// Sections are kept in tag order so the bytes are a pure function of the contents.
struct Container {
    std::array<char, 8> magic{};
    uint32_t version = 0;
    std::map<std::string, std::string> sections;

    std::string encode() const;
    /// Verifies magic, version and checksum before returning the sections.
    static Container decode(std::string_view bytes, std::string_view expected_magic, uint32_t expected_version);
};

std::array<char, 8> make_magic(std::string_view text);

/// Write to a temporary sibling, then rename over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file_bytes(const std::filesystem::path& path);

}  // namespace schemasift
