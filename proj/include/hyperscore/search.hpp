#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hyperscore/detail/kernels.hpp"
#include "hyperscore/detail/rng.hpp"
#include "hyperscore/embedding.hpp"
#include "hyperscore/error.hpp"
#include "hyperscore/knn_graph.hpp"
#include "hyperscore/qnet.hpp"

namespace hyperscore {

struct ScoredDoc {
    DocId id = 0;
    float score = 0.0f;

    friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Orders by descending score, then ascending id.
constexpr bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) noexcept {
    return a.score > b.score || (a.score == b.score && a.id < b.id);
}

struct RankedList {
    std::string query_id;
    std::vector<ScoredDoc> entries;
};

enum class Termination { EmptyPool, EarlyStop, MaxIter, FullScan };

constexpr std::string_view to_string(Termination t) noexcept {
    switch (t) {
    case Termination::EmptyPool: return "empty-pool";
    case Termination::EarlyStop: return "early-stop";
    case Termination::MaxIter: return "max-iter";
    case Termination::FullScan: return "full-scan";
    }
    return "unknown";
}

struct SearchStats {
    std::size_t scored_count = 0;
    std::size_t iterations = 0;
    Termination terminated_by = Termination::FullScan;
    std::chrono::duration<double> wall_time{0};
};

struct SearchResult {
    RankedList ranking;
    SearchStats stats;
};

/// Graph search knobs: initial random pool, selection beam, iteration cap.
struct SearchConfig {
    std::size_t initial_pool = 10'000;
    std::size_t n_candidates = 64;
    std::size_t max_iter = 16;
    std::size_t k = 100;
    std::uint64_t seed = 0;
};

/// Speed-oriented preset.
inline SearchConfig efficient_1(std::size_t k, std::uint64_t seed = 0) {
    return {10'000, 64, 16, k, seed};
}

/// Quality-oriented preset.
inline SearchConfig efficient_2(std::size_t k, std::uint64_t seed = 0) {
    return {100'000, 328, 20, k, seed};
}

inline void validate_config(const SearchConfig& c) {
    if (c.initial_pool == 0 || c.n_candidates == 0 || c.max_iter == 0) {
        raise(ErrorKind::Validation, "initial_pool, n_candidates and max_iter must be positive");
    }
    if (c.n_candidates > c.initial_pool) {
        raise(ErrorKind::Validation, "n_candidates (" + std::to_string(c.n_candidates) +
                                         ") exceeds initial_pool (" +
                                         std::to_string(c.initial_pool) + ")");
    }
    if (c.k == 0) raise(ErrorKind::Validation, "k must be >= 1");
}

/// How pool scoring is batched. Does not affect results.
struct ScoringOptions {
    std::size_t block_size = 4096;
    unsigned threads = 1;
};

/// Size-bounded result set whose root is the current worst member. A
/// newcomer evicts the root only on a strictly higher score.
class TopK {
public:
    explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

    bool full() const noexcept { return heap_.size() == k_; }
    std::size_t size() const noexcept { return heap_.size(); }
    float min_score() const noexcept { return heap_.front().score; }

    void offer(ScoredDoc doc) {
        if (heap_.size() < k_) {
            heap_.push_back(doc);
            std::push_heap(heap_.begin(), heap_.end(), ranks_before);
        } else if (doc.score > heap_.front().score) {
            std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
            heap_.back() = doc;
            std::push_heap(heap_.begin(), heap_.end(), ranks_before);
        }
    }

    std::vector<ScoredDoc> sorted() const {
        auto out = heap_;
        std::sort(out.begin(), out.end(), ranks_before);
        return out;
    }

private:
    std::size_t k_;
    std::vector<ScoredDoc> heap_;
};

namespace detail {

inline void score_ids(const EmbeddingMatrix& corpus, const QNetParams& qnet,
                      std::span<const DocId> ids, std::span<float> out,
                      const ScoringOptions& opts) {
    const std::size_t block = std::max<std::size_t>(opts.block_size, 1);
    for (std::size_t start = 0; start < ids.size(); start += block) {
        const std::size_t len = std::min(block, ids.size() - start);
        const auto gathered = rows(corpus, ids.subspan(start, len));
        const auto scores = qnet_batch(qnet, gathered, opts.threads);
        std::copy(scores.begin(), scores.end(), out.begin() + static_cast<std::ptrdiff_t>(start));
    }
}

/// `count` distinct ids drawn uniformly from [0, n) (Floyd's method), marked
/// in `visited` and returned in ascending order.
inline std::vector<DocId> sample_distinct(std::size_t n, std::size_t count, Rng& rng,
                                          std::vector<std::uint8_t>& visited) {
    std::vector<DocId> picked;
    if (count >= n) {
        picked.resize(n);
        std::iota(picked.begin(), picked.end(), DocId{0});
        std::fill(visited.begin(), visited.end(), std::uint8_t{1});
        return picked;
    }
    picked.reserve(count);
    for (std::size_t j = n - count; j < n; ++j) {
        auto t = static_cast<DocId>(rng.uniform_index(j + 1));
        if (visited[t]) t = static_cast<DocId>(j);
        visited[t] = 1;
        picked.push_back(t);
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

inline void require_corpus(const EmbeddingMatrix& corpus, std::size_t k) {
    if (corpus.count() == 0) raise(ErrorKind::Validation, "corpus is empty");
    if (k == 0) raise(ErrorKind::Validation, "k must be >= 1");
}

} // namespace detail

/// Scores every document and keeps the exact top-k.
inline SearchResult exhaustive_search(const EmbeddingMatrix& corpus, const QNetParams& qnet,
                                      std::size_t k, const ScoringOptions& opts = {}) {
    const auto start = std::chrono::steady_clock::now();
    detail::require_corpus(corpus, k);
    const std::size_t n = corpus.count();
    const std::size_t block = std::max<std::size_t>(opts.block_size, 1);
    TopK top(k);
    std::vector<DocId> ids;
    for (std::size_t lo = 0; lo < n; lo += block) {
        const std::size_t hi = std::min(n, lo + block);
        ids.resize(hi - lo);
        std::iota(ids.begin(), ids.end(), static_cast<DocId>(lo));
        const auto scores = qnet_batch(qnet, rows(corpus, ids), opts.threads);
        for (std::size_t i = 0; i < ids.size(); ++i) top.offer({ids[i], scores[i]});
    }
    SearchResult result;
    result.ranking.entries = top.sorted();
    result.stats.scored_count = n;
    result.stats.iterations = 1;
    result.stats.terminated_by = Termination::FullScan;
    result.stats.wall_time = std::chrono::steady_clock::now() - start;
    return result;
}

/// Greedy best-first traversal of the neighbor graph driven by q-net scores.
///
/// Each round scores the whole pool, stops early once the result set is full
/// and nothing in the pool beats its weakest member, merges the best
/// n_candidates into the result set, and replaces the pool with their
/// not-yet-visited neighbors. Documents are marked visited when they enter a
/// pool, so none is scored twice.
inline SearchResult efficient_search(const EmbeddingMatrix& corpus, const NeighborGraph& graph,
                                     const QNetParams& qnet, const SearchConfig& config,
                                     const ScoringOptions& opts = {}) {
    const auto start = std::chrono::steady_clock::now();
    validate_config(config);
    detail::require_corpus(corpus, config.k);
    if (graph.count != corpus.count()) {
        raise(ErrorKind::Validation, "graph has " + std::to_string(graph.count) +
                                         " nodes, corpus has " + std::to_string(corpus.count()));
    }
    if (graph.degree == 0) raise(ErrorKind::Validation, "graph degree is 0");

    const std::size_t n = corpus.count();
    Rng rng(config.seed);
    std::vector<std::uint8_t> visited(n, 0);
    std::vector<DocId> pool =
        detail::sample_distinct(n, std::min(config.initial_pool, n), rng, visited);

    TopK top(config.k);
    SearchStats stats;
    std::vector<float> scores;
    std::vector<std::size_t> order;
    std::vector<DocId> next;
    for (;;) {
        ++stats.iterations;
        scores.resize(pool.size());
        detail::score_ids(corpus, qnet, pool, scores, opts);
        stats.scored_count += pool.size();

        const float best = *std::max_element(scores.begin(), scores.end());
        if (top.full() && best < top.min_score()) {
            stats.terminated_by = Termination::EarlyStop;
            break;
        }

        const std::size_t take = std::min(config.n_candidates, pool.size());
        order.resize(pool.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto better = [&](std::size_t a, std::size_t b) {
            return ranks_before({pool[a], scores[a]}, {pool[b], scores[b]});
        };
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                          order.end(), better);

        next.clear();
        for (std::size_t s = 0; s < take; ++s) {
            const std::size_t idx = order[s];
            top.offer({pool[idx], scores[idx]});
            for (DocId nb : graph.row(pool[idx])) {
                if (!visited[nb]) {
                    visited[nb] = 1;
                    next.push_back(nb);
                }
            }
        }
        pool.swap(next);
        if (pool.empty()) {
            stats.terminated_by = Termination::EmptyPool;
            break;
        }
        if (stats.iterations == config.max_iter) {
            stats.terminated_by = Termination::MaxIter;
            break;
        }
    }

    SearchResult result;
    result.ranking.entries = top.sorted();
    result.stats = stats;
    result.stats.wall_time = std::chrono::steady_clock::now() - start;
    return result;
}

/// Exact maximum inner product baseline.
inline SearchResult flat_ip_search(const EmbeddingMatrix& corpus, std::span<const float> query,
                                   std::size_t k) {
    const auto start = std::chrono::steady_clock::now();
    detail::require_corpus(corpus, k);
    if (query.size() != corpus.dim()) {
        raise(ErrorKind::Shape, "query has width " + std::to_string(query.size()) +
                                    ", corpus has " + std::to_string(corpus.dim()));
    }
    TopK top(k);
    for (std::size_t i = 0; i < corpus.count(); ++i) {
        top.offer({static_cast<DocId>(i), detail::dot(query, corpus.row(i))});
    }
    SearchResult result;
    result.ranking.entries = top.sorted();
    result.stats.scored_count = corpus.count();
    result.stats.iterations = 1;
    result.stats.terminated_by = Termination::FullScan;
    result.stats.wall_time = std::chrono::steady_clock::now() - start;
    return result;
}

/// Single-layer q-net whose score is <query, doc> + 0.
inline QNetParams linear_qnet(std::span<const float> query) {
    QNetParams params;
    params.layers.push_back({Matrix(1, query.size(), std::vector<float>(query.begin(), query.end())),
                             std::vector<float>{0.0f}});
    return params;
}

} // namespace hyperscore
