#include "schemasift/binary_io.h"

#include <zlib.h>

#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "schemasift/error.h"

namespace schemasift {

void ByteWriter::u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void ByteWriter::u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<uint32_t>(v)); }

void ByteWriter::f64(double v) { u64(std::bit_cast<uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
    u32(static_cast<uint32_t>(s.size()));
    bytes(s);
}

std::string_view ByteReader::bytes(size_t n) {
    if (n > remaining()) {
        throw Error(ErrorCode::Corruption, "truncated data: need " + std::to_string(n) + " bytes, have " +
                                               std::to_string(remaining()));
    }
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
}

uint8_t ByteReader::u8() { return static_cast<uint8_t>(bytes(1)[0]); }

uint32_t ByteReader::u32() {
    auto b = bytes(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(b[i])) << (8 * i);
    return v;
}

uint64_t ByteReader::u64() {
    auto b = bytes(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(b[i])) << (8 * i);
    return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
    auto n = u32();
    return std::string(bytes(n));
}

uint32_t crc32(std::string_view data) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in chunks.
    size_t pos = 0;
    while (pos < data.size()) {
        size_t n = std::min<size_t>(data.size() - pos, 1u << 30);
        crc = ::crc32(crc, reinterpret_cast<const Bytef*>(data.data() + pos), static_cast<uInt>(n));
        pos += n;
    }
    return static_cast<uint32_t>(crc);
}

std::array<char, 8> make_magic(std::string_view text) {
    std::array<char, 8> m{};
    std::memcpy(m.data(), text.data(), std::min<size_t>(text.size(), 8));
    return m;
}

std::string Container::encode() const {
    ByteWriter w;
    w.bytes(std::string_view(magic.data(), magic.size()));
    w.u32(version);
    w.u32(static_cast<uint32_t>(sections.size()));
    for (auto& [tag, payload] : sections) {
        std::string t = tag;
        t.resize(4, ' ');
        w.bytes(t);
        w.u64(payload.size());
        w.bytes(payload);
    }
    w.u32(crc32(w.data()));
    return w.take();
}

Container Container::decode(std::string_view bytes, std::string_view expected_magic, uint32_t expected_version) {
    if (bytes.size() < 8 + 4 + 4 + 4) throw Error(ErrorCode::Corruption, "file too short");
    auto body = bytes.substr(0, bytes.size() - 4);
    ByteReader trailer(bytes.substr(bytes.size() - 4));
    if (trailer.u32() != crc32(body)) throw Error(ErrorCode::Corruption, "checksum mismatch");
    ByteReader r(body);
    Container c;
    auto m = r.bytes(8);
    std::memcpy(c.magic.data(), m.data(), 8);
    if (c.magic != make_magic(expected_magic)) {
        throw Error(ErrorCode::Corruption, "bad magic, expected " + std::string(expected_magic));
    }
    c.version = r.u32();
    if (c.version != expected_version) {
        throw Error(ErrorCode::VersionMismatch, "format version " + std::to_string(c.version) + ", expected " +
                                                    std::to_string(expected_version));
    }
    auto n = r.u32();
    for (uint32_t i = 0; i < n; ++i) {
        std::string tag(r.bytes(4));
        while (!tag.empty() && tag.back() == ' ') tag.pop_back();
        auto len = r.u64();
        if (len > r.remaining()) throw Error(ErrorCode::Corruption, "section " + tag + " overruns the file");
        c.sections[tag] = std::string(r.bytes(len));
    }
    if (!r.done()) throw Error(ErrorCode::Corruption, "trailing bytes after sections");
    return c;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    static std::atomic<uint64_t> counter{0};
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace schemasift
