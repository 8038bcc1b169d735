#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hyperscore/detail/binary_io.hpp"
#include "hyperscore/detail/parallel.hpp"
#include "hyperscore/embedding.hpp"
#include "hyperscore/error.hpp"

namespace hyperscore {

inline constexpr std::size_t kDefaultGraphDegree = 100;

/// Fixed-degree document graph. Row i lists the `degree` nearest documents to
/// i by Euclidean distance, closest first, ties broken by ascending id.
struct NeighborGraph {
    std::size_t count = 0;
    std::size_t degree = 0;
    std::vector<DocId> adjacency; // count x degree, row-major

    std::span<const DocId> row(std::size_t i) const noexcept {
        return {adjacency.data() + i * degree, degree};
    }

    friend bool operator==(const NeighborGraph&, const NeighborGraph&) = default;
};

inline std::span<const DocId> neighbors(const NeighborGraph& graph, DocId id) {
    if (id >= graph.count) {
        raise(ErrorKind::Index, "doc id " + std::to_string(id) + " out of range (count " +
                                    std::to_string(graph.count) + ")");
    }
    return graph.row(id);
}

namespace detail {

inline constexpr std::size_t kGraphColBlock = 64;
inline constexpr std::size_t kGraphRowBlock = 8;

/// Bounded max-heap on (squared distance, id); keeps the `capacity` smallest.
class NearestSet {
public:
    using Entry = std::pair<float, DocId>;

    explicit NearestSet(std::size_t capacity) : capacity_(capacity) { heap_.reserve(capacity); }

    void clear() { heap_.clear(); }

    void offer(float dist, DocId id) {
        if (heap_.size() < capacity_) {
            heap_.emplace_back(dist, id);
            std::push_heap(heap_.begin(), heap_.end());
            return;
        }
        const Entry& worst = heap_.front();
        if (dist < worst.first || (dist == worst.first && id < worst.second)) {
            std::pop_heap(heap_.begin(), heap_.end());
            heap_.back() = {dist, id};
            std::push_heap(heap_.begin(), heap_.end());
        }
    }

    void write_sorted(std::span<DocId> out) {
        std::sort_heap(heap_.begin(), heap_.end());
        for (std::size_t i = 0; i < heap_.size(); ++i) out[i] = heap_[i].second;
    }

private:
    std::size_t capacity_;
    std::vector<Entry> heap_;
};

} // namespace detail

/// Exact kNN graph under squared L2 (same neighbor order as L2).
///
/// The corpus is re-laid out in 64-column tiles stored dimension-major, so the
/// innermost loop runs across documents and vectorizes while each pair's
/// distance is still accumulated dimension by dimension in order.
inline NeighborGraph build_graph(const EmbeddingMatrix& corpus, std::size_t degree,
                                 unsigned threads = detail::default_threads()) {
    const std::size_t n = corpus.count();
    const std::size_t h = corpus.dim();
    if (n < 2) {
        raise(ErrorKind::TooSmall, "graph needs at least 2 documents, corpus has " +
                                       std::to_string(n));
    }
    if (degree == 0) raise(ErrorKind::Domain, "graph degree must be positive");
    if (n > std::numeric_limits<DocId>::max()) {
        raise(ErrorKind::Domain, "corpus too large for 32-bit document ids");
    }
    degree = std::min(degree, n - 1);

    constexpr std::size_t B = detail::kGraphColBlock;
    const std::size_t col_blocks = (n + B - 1) / B;
    std::vector<float> tiles(col_blocks * h * B, 0.0f);
    for (std::size_t j = 0; j < n; ++j) {
        const auto src = corpus.row(j);
        float* tile = tiles.data() + (j / B) * h * B + (j % B);
        for (std::size_t k = 0; k < h; ++k) tile[k * B] = src[k];
    }

    NeighborGraph graph{n, degree, std::vector<DocId>(n * degree)};
    constexpr std::size_t R = detail::kGraphRowBlock;
    const std::size_t row_blocks = (n + R - 1) / R;
    detail::parallel_for(row_blocks, threads, 4, [&](std::size_t lo, std::size_t hi) {
        std::vector<detail::NearestSet> best(R, detail::NearestSet(degree));
        alignas(64) float acc[B];
        for (std::size_t rb = lo; rb < hi; ++rb) {
            const std::size_t i0 = rb * R;
            const std::size_t i1 = std::min(n, i0 + R);
            for (auto& s : best) s.clear();
            for (std::size_t cb = 0; cb < col_blocks; ++cb) {
                const float* tile = tiles.data() + cb * h * B;
                const std::size_t j0 = cb * B;
                const std::size_t width = std::min(B, n - j0);
                for (std::size_t i = i0; i < i1; ++i) {
                    const float* x = corpus.row(i).data();
                    std::fill(acc, acc + B, 0.0f);
                    for (std::size_t k = 0; k < h; ++k) {
                        const float xk = x[k];
                        const float* t = tile + k * B;
                        for (std::size_t jj = 0; jj < B; ++jj) {
                            const float diff = t[jj] - xk;
                            acc[jj] += diff * diff;
                        }
                    }
                    auto& set = best[i - i0];
                    for (std::size_t jj = 0; jj < width; ++jj) {
                        const std::size_t j = j0 + jj;
                        if (j != i) set.offer(acc[jj], static_cast<DocId>(j));
                    }
                }
            }
            for (std::size_t i = i0; i < i1; ++i) {
                best[i - i0].write_sorted({graph.adjacency.data() + i * degree, degree});
            }
        }
    });
    return graph;
}

struct TimedGraph {
    NeighborGraph graph;
    double build_seconds = 0.0;
};

inline TimedGraph build_graph_timed(const EmbeddingMatrix& corpus, std::size_t degree,
                                    unsigned threads = detail::default_threads()) {
    const auto start = std::chrono::steady_clock::now();
    auto graph = build_graph(corpus, degree, threads);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    return {std::move(graph), elapsed.count()};
}

namespace graph_format {
inline constexpr std::string_view kMagic = "HYGR";
inline constexpr std::uint32_t kVersion = 1;
} // namespace graph_format

inline void validate_graph(const NeighborGraph& graph) {
    if (graph.adjacency.size() != graph.count * graph.degree) {
        raise(ErrorKind::SizeMismatch, "adjacency length does not match count x degree");
    }
    for (std::size_t i = 0; i < graph.count; ++i) {
        for (DocId id : graph.row(i)) {
            if (id >= graph.count) {
                raise(ErrorKind::Validation, "row " + std::to_string(i) + " references id " +
                                                 std::to_string(id) + " >= count " +
                                                 std::to_string(graph.count));
            }
            if (id == i) raise(ErrorKind::Validation, "row " + std::to_string(i) + " has a self-loop");
        }
    }
}

inline void save_graph(const NeighborGraph& graph, const std::filesystem::path& path) {
    validate_graph(graph);
    detail::ByteWriter out;
    out.magic(graph_format::kMagic);
    out.put<std::uint32_t>(graph_format::kVersion);
    out.put<std::uint64_t>(graph.count);
    out.put<std::uint32_t>(static_cast<std::uint32_t>(graph.degree));
    out.put_span<DocId>(graph.adjacency);
    out.save(path);
}

inline NeighborGraph load_graph(const std::filesystem::path& path) {
    auto in = detail::ByteReader::from_file(path);
    in.expect_magic(graph_format::kMagic);
    detail::check_version(in, graph_format::kVersion);
    NeighborGraph graph;
    graph.count = in.get<std::uint64_t>("count");
    graph.degree = in.get<std::uint32_t>("degree");
    const std::uint64_t expected = static_cast<std::uint64_t>(graph.count) * graph.degree * 4;
    if (in.remaining() != expected) {
        raise(ErrorKind::SizeMismatch, path.string() + ": expected " + std::to_string(expected) +
                                           " adjacency bytes, file has " +
                                           std::to_string(in.remaining()));
    }
    graph.adjacency.resize(graph.count * graph.degree);
    in.get_into<DocId>(graph.adjacency, "adjacency");
    validate_graph(graph);
    return graph;
}

} // namespace hyperscore
