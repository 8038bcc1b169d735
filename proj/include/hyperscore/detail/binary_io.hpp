#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "hyperscore/error.hpp"

namespace hyperscore::detail {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts need byte swapping");

/// Append-only little-endian writer. Buffers everything and flushes once so a
/// failed validation never leaves a half-written file behind.
class ByteWriter {
public:
    void magic(std::string_view tag) { bytes_.insert(bytes_.end(), tag.begin(), tag.end()); }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put_span(std::span<const T> values) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
        bytes_.insert(bytes_.end(), p, p + values.size_bytes());
    }

    std::size_t size() const noexcept { return bytes_.size(); }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) raise(ErrorKind::Io, "cannot open for writing: " + path.string());
        out.write(reinterpret_cast<const char*>(bytes_.data()),
                  static_cast<std::streamsize>(bytes_.size()));
        if (!out) raise(ErrorKind::Io, "write failed: " + path.string());
    }

private:
    std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader over a whole file held in memory.
class ByteReader {
public:
    static ByteReader from_file(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) raise(ErrorKind::Io, "cannot open for reading: " + path.string());
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
        return ByteReader(std::move(bytes), path.string());
    }

    ByteReader(std::vector<std::uint8_t> bytes, std::string origin)
        : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

    void expect_magic(std::string_view tag) {
        if (remaining() < tag.size() ||
            std::memcmp(bytes_.data() + pos_, tag.data(), tag.size()) != 0) {
            raise(ErrorKind::Format, origin_ + ": bad magic, expected \"" + std::string(tag) + "\"");
        }
        pos_ += tag.size();
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get(std::string_view what) {
        need(sizeof(T), what);
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void get_into(std::span<T> out, std::string_view what) {
        need(out.size_bytes(), what);
        std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
        pos_ += out.size_bytes();
    }

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
    std::size_t position() const noexcept { return pos_; }
    const std::string& origin() const noexcept { return origin_; }

    void expect_end() const {
        if (remaining() != 0) {
            raise(ErrorKind::SizeMismatch, origin_ + ": " + std::to_string(remaining()) +
                                               " trailing bytes after payload");
        }
    }

private:
    void need(std::size_t n, std::string_view what) const {
        if (remaining() < n) {
            raise(ErrorKind::SizeMismatch, origin_ + ": truncated while reading " +
                                               std::string(what) + " (need " + std::to_string(n) +
                                               " bytes, have " + std::to_string(remaining()) + ")");
        }
    }

    std::vector<std::uint8_t> bytes_;
    std::string origin_;
    std::size_t pos_ = 0;
};

inline void check_version(ByteReader& in, std::uint32_t supported) {
    const auto version = in.get<std::uint32_t>("version");
    if (version != supported) {
        raise(ErrorKind::UnsupportedVersion,
              in.origin() + ": version " + std::to_string(version) + " (supported: " +
                  std::to_string(supported) + ")");
    }
}

} // namespace hyperscore::detail
