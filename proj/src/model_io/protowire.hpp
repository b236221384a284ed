#pragma once

// Minimal protobuf wire-format codec: enough of the encoding to read and write
// the ONNX ModelProto subset without a generated-code dependency.

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

#include "safeai/error.hpp"

namespace safeai::wire {

enum class WireType : std::uint32_t { Varint = 0, Fixed64 = 1, Length = 2, Fixed32 = 5 };

struct Field {
    std::uint32_t number = 0;
    WireType type = WireType::Varint;
    std::uint64_t varint = 0;                  // Varint / Fixed32 / Fixed64 payload
    std::span<const std::uint8_t> bytes;       // Length-delimited payload

    std::string_view text() const {
        return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
    }
    float as_float() const {
        auto bits = static_cast<std::uint32_t>(varint);
        float f;
        std::memcpy(&f, &bits, sizeof f);
        return f;
    }
    double as_double() const {
        double d;
        std::memcpy(&d, &varint, sizeof d);
        return d;
    }
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    bool at_end() const { return pos_ >= data_.size(); }

    std::uint64_t read_varint() {
        std::uint64_t value = 0;
        for (int shift = 0; shift < 64; shift += 7) {
            if (pos_ >= data_.size()) fail("truncated varint");
            auto b = data_[pos_++];
            value |= static_cast<std::uint64_t>(b & 0x7F) << shift;
            if ((b & 0x80) == 0) return value;
        }
        fail("varint longer than 10 bytes");
    }

    std::uint64_t read_fixed(std::size_t width) {
        if (data_.size() - pos_ < width) fail("truncated fixed-width field");
        std::uint64_t v = 0;
        std::memcpy(&v, data_.data() + pos_, width);
        pos_ += width;
        return v;
    }

    std::span<const std::uint8_t> read_bytes() {
        auto len = read_varint();
        if (len > data_.size() - pos_) fail("length-delimited field overruns its message");
        auto out = data_.subspan(pos_, static_cast<std::size_t>(len));
        pos_ += static_cast<std::size_t>(len);
        return out;
    }

    Field next() {
        auto key = read_varint();
        Field f;
        f.number = static_cast<std::uint32_t>(key >> 3);
        if (f.number == 0) fail("field number 0");
        switch (key & 0x7) {
            case 0: f.type = WireType::Varint; f.varint = read_varint(); break;
            case 1: f.type = WireType::Fixed64; f.varint = read_fixed(8); break;
            case 2: f.type = WireType::Length; f.bytes = read_bytes(); break;
            case 5: f.type = WireType::Fixed32; f.varint = read_fixed(4); break;
            default: fail("unsupported wire type " + std::to_string(key & 0x7));
        }
        return f;
    }

    [[noreturn]] static void fail(const std::string& msg) { throw Error(ErrorKind::Parse, msg); }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

class Writer {
public:
    void varint(std::uint64_t v) {
        while (v >= 0x80) {
            buf_.push_back(static_cast<char>((v & 0x7F) | 0x80));
            v >>= 7;
        }
        buf_.push_back(static_cast<char>(v));
    }

    void key(std::uint32_t number, WireType type) {
        varint((static_cast<std::uint64_t>(number) << 3) | static_cast<std::uint32_t>(type));
    }

    void int_field(std::uint32_t number, std::int64_t v) {
        key(number, WireType::Varint);
        varint(static_cast<std::uint64_t>(v));
    }

    void float_field(std::uint32_t number, float v) {
        key(number, WireType::Fixed32);
        char b[4];
        std::memcpy(b, &v, 4);
        buf_.append(b, 4);
    }

    void bytes_field(std::uint32_t number, std::string_view payload) {
        key(number, WireType::Length);
        varint(payload.size());
        buf_.append(payload);
    }

    void message_field(std::uint32_t number, const Writer& sub) { bytes_field(number, sub.buf_); }

    const std::string& data() const { return buf_; }

private:
    std::string buf_;
};

}  // namespace safeai::wire
