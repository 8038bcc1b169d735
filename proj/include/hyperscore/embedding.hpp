#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hyperscore/detail/binary_io.hpp"
#include "hyperscore/detail/text.hpp"
#include "hyperscore/error.hpp"
#include "hyperscore/matrix.hpp"

namespace hyperscore {

/// Index of a document row in a corpus matrix.
using DocId = std::uint32_t;

/// Storage type on disk. Arithmetic is always F32.
enum class DType : std::uint8_t { F32 = 0, BF16 = 1 };

inline constexpr std::size_t dtype_bytes(DType dtype) noexcept {
    return dtype == DType::F32 ? 4 : 2;
}

/// Round-to-nearest-even narrowing. Callers guarantee a finite input.
inline std::uint16_t f32_to_bf16(float value) noexcept {
    const auto bits = std::bit_cast<std::uint32_t>(value);
    const std::uint32_t rounding = 0x7fffu + ((bits >> 16) & 1u);
    return static_cast<std::uint16_t>((bits + rounding) >> 16);
}

inline float bf16_to_f32(std::uint16_t value) noexcept {
    return std::bit_cast<float>(static_cast<std::uint32_t>(value) << 16);
}

/// N x h block of embeddings (documents, or the tokens of one query).
///
/// Values are held widened to F32. A BF16 matrix rounds its values to BF16
/// precision on construction, so what is in memory is exactly what a write
/// followed by a read produces.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;

    explicit EmbeddingMatrix(Matrix values, DType dtype = DType::F32)
        : values_(std::move(values)), dtype_(dtype) {
        if (values_.cols() == 0) raise(ErrorKind::Validation, "embedding dim must be >= 1");
        if (dtype_ == DType::BF16) {
            for (float& v : values_.values()) {
                if (std::isfinite(v)) v = bf16_to_f32(f32_to_bf16(v));
            }
        }
    }

    std::size_t dim() const noexcept { return values_.cols(); }
    std::size_t count() const noexcept { return values_.rows(); }
    DType dtype() const noexcept { return dtype_; }

    std::span<const float> row(std::size_t i) const noexcept { return values_.row(i); }
    const Matrix& matrix() const noexcept { return values_; }

    friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

private:
    Matrix values_;
    DType dtype_ = DType::F32;
};

namespace embedding_format {
inline constexpr std::string_view kMagic = "HYEM";
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 4 + 4 + 1 + 4 + 8;
} // namespace embedding_format

inline void validate_finite(const Matrix& m, const std::string& what) {
    const auto bad = first_non_finite(m.values());
    if (bad != m.size()) {
        raise(ErrorKind::Validation, what + ": non-finite value at row " +
                                         std::to_string(bad / m.cols()) + ", column " +
                                         std::to_string(bad % m.cols()));
    }
}

inline void write_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
    validate_finite(matrix.matrix(), path.string());
    detail::ByteWriter out;
    out.magic(embedding_format::kMagic);
    out.put<std::uint32_t>(embedding_format::kVersion);
    out.put<std::uint8_t>(static_cast<std::uint8_t>(matrix.dtype()));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(matrix.dim()));
    out.put<std::uint64_t>(matrix.count());
    const auto values = matrix.matrix().values();
    if (matrix.dtype() == DType::F32) {
        out.put_span(values);
    } else {
        std::vector<std::uint16_t> narrow(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) narrow[i] = f32_to_bf16(values[i]);
        out.put_span<std::uint16_t>(narrow);
    }
    out.save(path);
}

inline EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
    auto in = detail::ByteReader::from_file(path);
    in.expect_magic(embedding_format::kMagic);
    detail::check_version(in, embedding_format::kVersion);
    const auto code = in.get<std::uint8_t>("dtype");
    if (code > 1) {
        raise(ErrorKind::UnsupportedDtype, path.string() + ": dtype code " + std::to_string(code));
    }
    const auto dtype = static_cast<DType>(code);
    const auto dim = in.get<std::uint32_t>("dim");
    const auto count = in.get<std::uint64_t>("count");
    if (dim == 0) raise(ErrorKind::Format, path.string() + ": dim must be >= 1");

    const std::uint64_t expected = count * dim * dtype_bytes(dtype);
    if (count != 0 && expected / count / dim != dtype_bytes(dtype)) {
        raise(ErrorKind::SizeMismatch, path.string() + ": declared shape overflows");
    }
    if (in.remaining() != expected) {
        raise(ErrorKind::SizeMismatch,
              path.string() + ": header declares " + std::to_string(count) + "x" +
                  std::to_string(dim) + " (" + std::to_string(expected) + " payload bytes), file has " +
                  std::to_string(in.remaining()));
    }

    std::vector<float> values(static_cast<std::size_t>(count) * dim);
    if (dtype == DType::F32) {
        in.get_into<float>(values, "payload");
    } else {
        std::vector<std::uint16_t> narrow(values.size());
        in.get_into<std::uint16_t>(narrow, "payload");
        for (std::size_t i = 0; i < narrow.size(); ++i) values[i] = bf16_to_f32(narrow[i]);
    }
    Matrix m(static_cast<std::size_t>(count), dim, std::move(values));
    validate_finite(m, path.string());
    return EmbeddingMatrix(std::move(m), dtype);
}

/// Gathers rows in the order given; duplicates are allowed.
inline Matrix rows(const EmbeddingMatrix& matrix, std::span<const DocId> ids) {
    Matrix out(ids.size(), matrix.dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= matrix.count()) {
            raise(ErrorKind::Index, "doc id " + std::to_string(ids[i]) + " out of range (count " +
                                        std::to_string(matrix.count()) + ")");
        }
        const auto src = matrix.row(ids[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

// Query token directories: one HYEM file per query plus a manifest of
// "query_id<TAB>relative_path<TAB>n_tokens" lines.

inline constexpr std::string_view kTokenManifestName = "manifest.tsv";

struct QueryTokenEntry {
    std::string query_id;
    std::filesystem::path relative_path;
    std::size_t n_tokens = 0;
};

struct QueryTokens {
    std::string query_id;
    EmbeddingMatrix tokens;
};

inline std::vector<QueryTokenEntry> read_token_manifest(const std::filesystem::path& dir) {
    const auto path = dir / kTokenManifestName;
    std::vector<QueryTokenEntry> entries;
    detail::for_each_line(path, [&](std::string_view line, std::size_t number) {
        if (detail::trim(line).empty()) return;
        const auto fields = detail::split(line, '\t');
        if (fields.size() != 3) {
            detail::parse_failure(path, number, "expected 3 tab-separated fields, got " +
                                                    std::to_string(fields.size()));
        }
        const auto n = detail::parse_number<std::size_t>(fields[2]);
        if (!n || fields[0].empty() || fields[1].empty()) {
            detail::parse_failure(path, number, "malformed manifest entry");
        }
        entries.push_back({std::string(fields[0]), std::string(fields[1]), *n});
    });
    return entries;
}

inline std::vector<QueryTokens> load_query_tokens(const std::filesystem::path& dir) {
    std::vector<QueryTokens> out;
    for (auto& entry : read_token_manifest(dir)) {
        auto tokens = read_embeddings(dir / entry.relative_path);
        if (tokens.count() != entry.n_tokens) {
            raise(ErrorKind::SizeMismatch, "query " + entry.query_id + ": manifest says " +
                                               std::to_string(entry.n_tokens) + " tokens, file has " +
                                               std::to_string(tokens.count()));
        }
        if (tokens.count() == 0) {
            raise(ErrorKind::Validation, "query " + entry.query_id + " has no tokens");
        }
        out.push_back({std::move(entry.query_id), std::move(tokens)});
    }
    return out;
}

inline void write_query_tokens(const std::filesystem::path& dir,
                               const std::vector<QueryTokens>& queries) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / kTokenManifestName, std::ios::trunc);
    if (!manifest) raise(ErrorKind::Io, "cannot write manifest in " + dir.string());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const std::string name = "q" + std::to_string(i) + ".hyem";
        write_embeddings(queries[i].tokens, dir / name);
        manifest << queries[i].query_id << '\t' << name << '\t' << queries[i].tokens.count()
                 << '\n';
    }
    if (!manifest) raise(ErrorKind::Io, "manifest write failed in " + dir.string());
}

} // namespace hyperscore
