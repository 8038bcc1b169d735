#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hyperscore/detail/binary_io.hpp"
#include "hyperscore/detail/kernels.hpp"
#include "hyperscore/detail/rng.hpp"
#include "hyperscore/embedding.hpp"
#include "hyperscore/error.hpp"
#include "hyperscore/matrix.hpp"
#include "hyperscore/qnet.hpp"

namespace hyperscore {

/// Parameters that generate one q-net layer of shape rows x cols (plus bias)
/// from a query's token embeddings.
///
///   X = [E_q | 1]                       n x (h+1)
///   K = X key_proj, V = X value_proj    n x d
///   A = softmax(Q K^T / sqrt(d)) V      m x d, Q = learned_queries
///   Z = LayerNorm(ReLU(A))              per row, over d features
///   P = flatten(Z) out_proj             row-major flatten, 1 x rows*(cols+1)
///   Theta = reshape(P) + base           rows x (cols+1); last column is the bias
struct HyperheadLayer {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Matrix key_proj;        // (h+1) x d
    Matrix value_proj;      // (h+1) x d
    Matrix learned_queries; // m x d
    Matrix out_proj;        // (m*d) x rows*(cols+1)
    Matrix base;            // rows x (cols+1)

    std::size_t encoder_dim() const noexcept {
        return key_proj.rows() == 0 ? 0 : key_proj.rows() - 1;
    }
    std::size_t attention_dim() const noexcept { return key_proj.cols(); }
    std::size_t query_count() const noexcept { return learned_queries.rows(); }

    friend bool operator==(const HyperheadLayer&, const HyperheadLayer&) = default;
};

struct HyperheadParams {
    std::size_t encoder_dim = 0;   // h
    std::size_t attention_dim = 0; // d
    std::size_t query_count = 0;   // m
    std::vector<HyperheadLayer> layers;

    friend bool operator==(const HyperheadParams&, const HyperheadParams&) = default;
};

namespace detail {

inline void require_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                          const std::string& stage, const char* name) {
    if (m.rows() != rows || m.cols() != cols) {
        raise(ErrorKind::Shape, stage + ": " + name + " is " + std::to_string(m.rows()) + "x" +
                                    std::to_string(m.cols()) + ", expected " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
    }
}

inline void check_layer_shapes(const HyperheadLayer& layer) {
    const std::size_t h = layer.encoder_dim();
    const std::size_t d = layer.attention_dim();
    const std::size_t m = layer.query_count();
    if (layer.key_proj.rows() < 2 || d == 0) {
        raise(ErrorKind::Shape, "expansion: key_proj must be (h+1) x d with h, d >= 1");
    }
    if (layer.rows == 0 || layer.cols == 0) {
        raise(ErrorKind::Shape, "projection: target shape must be non-empty");
    }
    require_shape(layer.value_proj, h + 1, d, "attention", "value_proj");
    if (m == 0) raise(ErrorKind::Shape, "attention: learned_queries must have >= 1 row");
    require_shape(layer.learned_queries, m, d, "attention", "learned_queries");
    require_shape(layer.out_proj, m * d, layer.rows * (layer.cols + 1), "projection", "out_proj");
    require_shape(layer.base, layer.rows, layer.cols + 1, "base", "base");
}

} // namespace detail

inline LinearLayer generate_layer(const Matrix& tokens, const HyperheadLayer& layer) {
    detail::check_layer_shapes(layer);
    const std::size_t h = layer.encoder_dim();
    const std::size_t d = layer.attention_dim();
    const std::size_t m = layer.query_count();
    const std::size_t n = tokens.rows();
    if (n == 0) raise(ErrorKind::Shape, "expansion: query has no tokens");
    if (tokens.cols() != h) {
        raise(ErrorKind::Shape, "expansion: token width " + std::to_string(tokens.cols()) +
                                    " != encoder width " + std::to_string(h));
    }

    // Keys and values from the ones-augmented tokens; the ones column
    // contributes the last projection row.
    Matrix keys(n, d), vals(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        auto k = keys.row(i);
        auto v = vals.row(i);
        for (std::size_t c = 0; c < d; ++c) {
            k[c] = layer.key_proj(h, c);
            v[c] = layer.value_proj(h, c);
        }
        const auto x = tokens.row(i);
        for (std::size_t j = 0; j < h; ++j) {
            const float xj = x[j];
            const auto kp = layer.key_proj.row(j);
            const auto vp = layer.value_proj.row(j);
            for (std::size_t c = 0; c < d; ++c) {
                k[c] += xj * kp[c];
                v[c] += xj * vp[c];
            }
        }
    }

    const float scale = 1.0f / std::sqrt(static_cast<float>(d));
    std::vector<float> latent(m * d, 0.0f);
    std::vector<float> weights(n);
    for (std::size_t q = 0; q < m; ++q) {
        const auto query = layer.learned_queries.row(q);
        for (std::size_t i = 0; i < n; ++i) weights[i] = detail::dot(query, keys.row(i)) * scale;
        detail::softmax_inplace(weights);
        std::span<float> out(latent.data() + q * d, d);
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = vals.row(i);
            for (std::size_t c = 0; c < d; ++c) out[c] += weights[i] * v[c];
        }
        detail::relu_inplace(out);
        detail::layer_norm_inplace(out);
    }

    const std::size_t width = layer.cols + 1;
    std::vector<float> projected(layer.rows * width, 0.0f);
    for (std::size_t z = 0; z < latent.size(); ++z) {
        const float lz = latent[z];
        const auto w = layer.out_proj.row(z);
        for (std::size_t o = 0; o < projected.size(); ++o) projected[o] += lz * w[o];
    }

    LinearLayer result{Matrix(layer.rows, layer.cols), std::vector<float>(layer.rows)};
    for (std::size_t r = 0; r < layer.rows; ++r) {
        const auto base = layer.base.row(r);
        for (std::size_t c = 0; c < layer.cols; ++c) {
            result.weights(r, c) = projected[r * width + c] + base[c];
        }
        result.bias[r] = projected[r * width + layer.cols] + base[layer.cols];
    }
    return result;
}

inline void validate_hyperhead(const HyperheadParams& params) {
    if (params.layers.empty()) raise(ErrorKind::Validation, "hyperhead has no target layers");
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        try {
            detail::check_layer_shapes(layer);
        } catch (const Error& e) {
            raise(e.kind(), "target layer " + std::to_string(l) + ": " + e.what());
        }
        if (layer.encoder_dim() != params.encoder_dim || layer.attention_dim() != params.attention_dim ||
            layer.query_count() != params.query_count) {
            raise(ErrorKind::Shape, "target layer " + std::to_string(l) +
                                        ": (h, d, m) disagrees with the header");
        }
        for (const Matrix* m : {&layer.key_proj, &layer.value_proj, &layer.learned_queries,
                                &layer.out_proj, &layer.base}) {
            if (first_non_finite(m->values()) != m->size()) {
                raise(ErrorKind::Validation,
                      "target layer " + std::to_string(l) + ": non-finite parameter");
            }
        }
    }
}

/// Builds the full q-net for one query, in execution order.
inline QNetParams generate_qnet(const Matrix& tokens, const HyperheadParams& params) {
    if (params.layers.empty()) raise(ErrorKind::Validation, "hyperhead has no target layers");
    QNetParams qnet;
    qnet.layers.reserve(params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        try {
            qnet.layers.push_back(generate_layer(tokens, params.layers[l]));
        } catch (const Error& e) {
            raise(e.kind(), "target layer " + std::to_string(l) + ": " + e.what());
        }
    }
    validate_qnet(qnet);
    return qnet;
}

inline QNetParams generate_qnet(const EmbeddingMatrix& tokens, const HyperheadParams& params) {
    return generate_qnet(tokens.matrix(), params);
}

namespace hyperhead_format {
inline constexpr std::string_view kMagic = "HYHH";
inline constexpr std::uint32_t kVersion = 1;
} // namespace hyperhead_format

inline void save_hyperhead(const HyperheadParams& params, const std::filesystem::path& path) {
    validate_hyperhead(params);
    detail::ByteWriter out;
    out.magic(hyperhead_format::kMagic);
    out.put<std::uint32_t>(hyperhead_format::kVersion);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(params.encoder_dim));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(params.attention_dim));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(params.query_count));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& layer : params.layers) {
        out.put<std::uint32_t>(static_cast<std::uint32_t>(layer.rows));
        out.put<std::uint32_t>(static_cast<std::uint32_t>(layer.cols));
        for (const Matrix* m : {&layer.key_proj, &layer.value_proj, &layer.learned_queries,
                                &layer.out_proj, &layer.base}) {
            out.put_span(m->values());
        }
    }
    out.save(path);
}

inline HyperheadParams load_hyperhead(const std::filesystem::path& path) {
    auto in = detail::ByteReader::from_file(path);
    in.expect_magic(hyperhead_format::kMagic);
    detail::check_version(in, hyperhead_format::kVersion);
    HyperheadParams params;
    params.encoder_dim = in.get<std::uint32_t>("h");
    params.attention_dim = in.get<std::uint32_t>("d");
    params.query_count = in.get<std::uint32_t>("m");
    const auto layer_count = in.get<std::uint32_t>("layer_count");
    const std::size_t h = params.encoder_dim, d = params.attention_dim, m = params.query_count;

    auto read_block = [&](std::size_t rows, std::size_t cols, const char* what) {
        if (rows * cols * 4 > in.remaining()) {
            raise(ErrorKind::SizeMismatch, path.string() + ": truncated in " + what);
        }
        Matrix block(rows, cols);
        in.get_into<float>(block.values(), what);
        return block;
    };
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        HyperheadLayer layer;
        layer.rows = in.get<std::uint32_t>("r");
        layer.cols = in.get<std::uint32_t>("t");
        layer.key_proj = read_block(h + 1, d, "key_proj");
        layer.value_proj = read_block(h + 1, d, "value_proj");
        layer.learned_queries = read_block(m, d, "learned_queries");
        layer.out_proj = read_block(m * d, layer.rows * (layer.cols + 1), "out_proj");
        layer.base = read_block(layer.rows, layer.cols + 1, "base");
        params.layers.push_back(std::move(layer));
    }
    in.expect_end();
    validate_hyperhead(params);
    return params;
}

/// Shape of a synthetic hyperhead: `qnet_layers` target layers producing a
/// q-net of width `qnet_dim` (qnet_layers - 1 hidden blocks plus the output).
struct HyperheadShape {
    std::size_t encoder_dim = 32;
    std::size_t attention_dim = 32;
    std::size_t query_count = 8;
    std::size_t qnet_layers = 3;
    std::size_t qnet_dim = 32;
};

/// Randomly initialised hyperhead (Gaussian, fan-in scaled). Stands in for
/// exported checkpoints in tests and benchmarks.
inline HyperheadParams make_random_hyperhead(const HyperheadShape& shape, std::uint64_t seed,
                                             float update_scale = 0.5f) {
    Rng rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    auto fill = [&](std::size_t rows, std::size_t cols, float scale) {
        Matrix m(rows, cols);
        for (float& v : m.values()) v = normal(rng.engine()) * scale;
        return m;
    };
    HyperheadParams params{shape.encoder_dim, shape.attention_dim, shape.query_count, {}};
    const std::size_t h = shape.encoder_dim, d = shape.attention_dim, m = shape.query_count;
    for (std::size_t l = 0; l < shape.qnet_layers; ++l) {
        HyperheadLayer layer;
        layer.rows = l + 1 == shape.qnet_layers ? 1 : shape.qnet_dim;
        layer.cols = shape.qnet_dim;
        const float proj_scale = 1.0f / std::sqrt(static_cast<float>(h + 1));
        layer.key_proj = fill(h + 1, d, proj_scale);
        layer.value_proj = fill(h + 1, d, proj_scale);
        layer.learned_queries = fill(m, d, 1.0f);
        const std::size_t out = layer.rows * (layer.cols + 1);
        layer.out_proj =
            fill(m * d, out, update_scale / std::sqrt(static_cast<float>(m * d * layer.cols)));
        layer.base = fill(layer.rows, layer.cols + 1, 1.0f / std::sqrt(static_cast<float>(layer.cols)));
        params.layers.push_back(std::move(layer));
    }
    return params;
}

} // namespace hyperscore
