#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hyperscore/detail/binary_io.hpp"
#include "hyperscore/detail/kernels.hpp"
#include "hyperscore/detail/parallel.hpp"
#include "hyperscore/error.hpp"
#include "hyperscore/matrix.hpp"

namespace hyperscore {

/// One generated layer: weights are rows x cols, bias has `rows` entries.
struct LinearLayer {
    Matrix weights;
    std::vector<float> bias;

    friend bool operator==(const LinearLayer&, const LinearLayer&) = default;
};

/// Query-specific scoring network. Every layer but the last is an h x h
/// block computing LayerNorm(ReLU(W x + b)) + x; the last maps h -> 1.
struct QNetParams {
    std::vector<LinearLayer> layers;

    /// Input width h, taken from the output layer.
    std::size_t input_dim() const noexcept {
        return layers.empty() ? 0 : layers.back().weights.cols();
    }

    friend bool operator==(const QNetParams&, const QNetParams&) = default;
};

/// Scores in document order.
using ScoreVector = std::vector<float>;

namespace detail {

inline void check_qnet_shapes(const QNetParams& params) {
    if (params.layers.empty()) raise(ErrorKind::Validation, "q-net has no layers");
    const std::size_t h = params.input_dim();
    if (h == 0) raise(ErrorKind::Shape, "q-net output layer has zero input width");
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const auto& layer = params.layers[i];
        const bool last = i + 1 == params.layers.size();
        const std::size_t want_rows = last ? 1 : h;
        if (layer.weights.rows() != want_rows || layer.weights.cols() != h) {
            raise(ErrorKind::Shape, "layer " + std::to_string(i) + ": expected " +
                                        std::to_string(want_rows) + "x" + std::to_string(h) +
                                        ", got " + std::to_string(layer.weights.rows()) + "x" +
                                        std::to_string(layer.weights.cols()));
        }
        if (layer.bias.size() != want_rows) {
            raise(ErrorKind::Shape, "layer " + std::to_string(i) + ": expected bias of length " +
                                        std::to_string(want_rows) + ", got " +
                                        std::to_string(layer.bias.size()));
        }
    }
}

/// Scratch buffers reused across rows so the hot loop never allocates.
struct QNetScratch {
    std::vector<float> current;
    std::vector<float> hidden;
};

inline float qnet_eval(const QNetParams& params, const float* doc, QNetScratch& scratch) {
    const std::size_t h = params.input_dim();
    scratch.current.assign(doc, doc + h);
    scratch.hidden.resize(h);
    float* cur = scratch.current.data();
    float* hid = scratch.hidden.data();
    const std::size_t hidden_layers = params.layers.size() - 1;
    for (std::size_t l = 0; l < hidden_layers; ++l) {
        const auto& layer = params.layers[l];
        for (std::size_t r = 0; r < h; ++r) {
            hid[r] = dot(layer.weights.row(r).data(), cur, h) + layer.bias[r];
        }
        relu_inplace({hid, h});
        layer_norm_inplace({hid, h});
        for (std::size_t r = 0; r < h; ++r) cur[r] += hid[r];
    }
    const auto& out = params.layers.back();
    return dot(out.weights.row(0).data(), cur, h) + out.bias[0];
}

} // namespace detail

/// Checks the structural invariants and that every parameter is finite.
/// Throws naming the first violation.
inline void validate_qnet(const QNetParams& params) {
    detail::check_qnet_shapes(params);
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        const auto& layer = params.layers[i];
        const auto bad = first_non_finite(layer.weights.values());
        if (bad != layer.weights.size()) {
            raise(ErrorKind::Validation, "layer " + std::to_string(i) +
                                             ": non-finite weight at index " + std::to_string(bad));
        }
        if (first_non_finite(layer.bias) != layer.bias.size()) {
            raise(ErrorKind::Validation, "layer " + std::to_string(i) + ": non-finite bias");
        }
    }
}

inline float qnet_forward(const QNetParams& params, std::span<const float> doc_vec) {
    detail::check_qnet_shapes(params);
    if (doc_vec.size() != params.input_dim()) {
        raise(ErrorKind::Shape, "document vector has width " + std::to_string(doc_vec.size()) +
                                    ", q-net expects " + std::to_string(params.input_dim()));
    }
    detail::QNetScratch scratch;
    return detail::qnet_eval(params, doc_vec.data(), scratch);
}

/// Scores every row of `block`. Rows are split across `threads` workers; each
/// row's arithmetic is the same as qnet_forward.
inline ScoreVector qnet_batch(const QNetParams& params, const Matrix& block, unsigned threads = 1) {
    detail::check_qnet_shapes(params);
    if (block.rows() > 0 && block.cols() != params.input_dim()) {
        raise(ErrorKind::Shape, "block has width " + std::to_string(block.cols()) +
                                    ", q-net expects " + std::to_string(params.input_dim()));
    }
    ScoreVector scores(block.rows());
    detail::parallel_for(block.rows(), threads, 1024, [&](std::size_t lo, std::size_t hi) {
        detail::QNetScratch scratch;
        for (std::size_t i = lo; i < hi; ++i) {
            scores[i] = detail::qnet_eval(params, block.row(i).data(), scratch);
        }
    });
    return scores;
}

namespace qnet_format {
inline constexpr std::string_view kMagic = "HYQN";
inline constexpr std::uint32_t kVersion = 1;
} // namespace qnet_format

inline void save_qnet(const QNetParams& params, const std::filesystem::path& path) {
    validate_qnet(params);
    detail::ByteWriter out;
    out.magic(qnet_format::kMagic);
    out.put<std::uint32_t>(qnet_format::kVersion);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& layer : params.layers) {
        out.put<std::uint32_t>(static_cast<std::uint32_t>(layer.weights.rows()));
        out.put<std::uint32_t>(static_cast<std::uint32_t>(layer.weights.cols()));
        out.put_span(layer.weights.values());
        out.put_span<float>(layer.bias);
    }
    out.save(path);
}

inline QNetParams load_qnet(const std::filesystem::path& path) {
    auto in = detail::ByteReader::from_file(path);
    in.expect_magic(qnet_format::kMagic);
    detail::check_version(in, qnet_format::kVersion);
    const auto layer_count = in.get<std::uint32_t>("layer_count");
    QNetParams params;
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        const auto rows = in.get<std::uint32_t>("rows");
        const auto cols = in.get<std::uint32_t>("cols");
        if (static_cast<std::uint64_t>(rows) * cols * 4 > in.remaining()) {
            raise(ErrorKind::SizeMismatch, path.string() + ": layer " + std::to_string(l) +
                                               " declares more weights than the file holds");
        }
        Matrix weights(rows, cols);
        in.get_into<float>(weights.values(), "weights");
        std::vector<float> bias(rows);
        in.get_into<float>(bias, "bias");
        params.layers.push_back({std::move(weights), std::move(bias)});
    }
    in.expect_end();
    validate_qnet(params);
    return params;
}

} // namespace hyperscore
