#pragma once
// Byte buffers, hex codec, and a bounds-checked little-endian wire
// reader/writer shared by every binary format in the project.

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sras {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline std::string to_string(ByteView b) {
    return std::string(b.begin(), b.end());
}

inline std::string to_hex(ByteView data) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (std::uint8_t b : data) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0x0f]);
    }
    return out;
}

inline std::optional<Bytes> from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) return std::nullopt;
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = nibble(hex[i]);
        int lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
    }
    return out;
}

template <std::size_t N>
std::optional<std::array<std::uint8_t, N>> fixed_from_hex(std::string_view hex) {
    auto raw = from_hex(hex);
    if (!raw || raw->size() != N) return std::nullopt;
    std::array<std::uint8_t, N> out{};
    std::memcpy(out.data(), raw->data(), N);
    return out;
}

struct WireError : std::runtime_error {
    explicit WireError(const std::string& what) : std::runtime_error(what) {}
};

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16le(std::uint16_t v) {
        buf_.push_back(static_cast<std::uint8_t>(v));
        buf_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32le(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64le(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void raw(ByteView data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
    void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    // u16 length prefix, then the bytes
    void var16(ByteView data) {
        if (data.size() > 0xffff) throw WireError("var16 field too long");
        u16le(static_cast<std::uint16_t>(data.size()));
        raw(data);
    }
    void var16(std::string_view s) {
        var16(ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    }
    void var32(ByteView data) {
        u32le(static_cast<std::uint32_t>(data.size()));
        raw(data);
    }
    const Bytes& buffer() const { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    Bytes buf_;
};

// Throws WireError on any out-of-bounds read; decode entry points catch it
// and turn the whole payload into a parse failure.
class ByteReader {
public:
    explicit ByteReader(ByteView data) : data_(data) {}

    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16le() {
        auto b = take(2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32le() {
        auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }
    std::uint64_t u64le() {
        auto b = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    }
    Bytes raw(std::size_t n) {
        auto b = take(n);
        return Bytes(b.begin(), b.end());
    }
    template <std::size_t N>
    std::array<std::uint8_t, N> fixed() {
        auto b = take(N);
        std::array<std::uint8_t, N> out{};
        std::memcpy(out.data(), b.data(), N);
        return out;
    }
    Bytes var16() { return raw(u16le()); }
    Bytes var32() {
        std::uint32_t n = u32le();
        if (n > remaining()) throw WireError("var32 length exceeds buffer");
        return raw(n);
    }
    std::string var16_string() {
        auto b = var16();
        return std::string(b.begin(), b.end());
    }
    std::size_t remaining() const { return data_.size() - pos_; }
    bool done() const { return pos_ == data_.size(); }
    void expect_done() const {
        if (!done()) throw WireError("trailing bytes after structure");
    }

private:
    ByteView take(std::size_t n) {
        if (n > remaining()) throw WireError("read past end of buffer");
        ByteView v = data_.subspan(pos_, n);
        pos_ += n;
        return v;
    }
    ByteView data_;
    std::size_t pos_ = 0;
};

}  // namespace sras
