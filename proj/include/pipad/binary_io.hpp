#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pipad/errors.hpp"

namespace pipad::io {

// Little-endian byte buffers. Every on-disk format in the project is built
// from these primitives.
class ByteWriter {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

    void u32s(std::span<const std::uint32_t> vs)
    {
        for (auto v : vs) u32(v);
    }
    void f32s(std::span<const float> vs)
    {
        for (auto v : vs) f32(v);
    }

    const std::vector<char>& bytes() const noexcept { return bytes_; }

private:
    void put(std::uint64_t v, int n)
    {
        for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }

    std::vector<char> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const char> bytes) : bytes_(bytes) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string raw(std::size_t n)
    {
        need(n);
        std::string s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }

    std::vector<std::uint32_t> u32s(std::size_t n)
    {
        need(n * 4);
        std::vector<std::uint32_t> out(n);
        for (auto& v : out) v = u32();
        return out;
    }
    std::vector<float> f32s(std::size_t n)
    {
        need(n * 4);
        std::vector<float> out(n);
        for (auto& v : out) v = f32();
        return out;
    }

    bool at_end() const noexcept { return pos_ == bytes_.size(); }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const
    {
        if (bytes_.size() - pos_ < n) {
            throw ValidationError("truncated binary input");
        }
    }

    std::uint64_t get(int n)
    {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const char> bytes_;
    std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const char> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace pipad::io
