#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hyperscore/detail/rng.hpp"
#include "hyperscore/detail/text.hpp"
#include "hyperscore/embedding.hpp"
#include "hyperscore/error.hpp"
#include "hyperscore/hyperhead.hpp"
#include "hyperscore/knn_graph.hpp"
#include "hyperscore/search.hpp"

namespace hyperscore {

struct LatencyRecord {
    std::string label;
    std::size_t corpus_size = 0;
    std::size_t n_queries = 0;
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double scored_mean = 0.0;
    double build_s = 0.0;
};

struct PowerLawFit {
    double exponent = 0.0;
    double coefficient = 0.0;
    double r_squared = 0.0;
};

using Millis = std::chrono::duration<double, std::milli>;

/// Nearest-rank percentile of an ascending sample.
inline double percentile(std::span<const double> sorted, double p) {
    if (sorted.empty()) return 0.0;
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

/// Times `search(i)` for every query index; the first `warmup` calls run but
/// are not recorded. `search` returns the number of documents it scored and
/// must include everything that counts as query latency (q-net generation and
/// retrieval); writing results out is excluded.
template <typename SearchFn>
LatencyRecord time_search(std::string label, std::size_t corpus_size, std::size_t n_queries,
                          SearchFn&& search, std::size_t warmup = 3) {
    if (n_queries <= warmup) {
        raise(ErrorKind::Validation, "no queries left to time after " + std::to_string(warmup) +
                                         " warmup queries (" + std::to_string(n_queries) + " given)");
    }
    std::vector<double> samples;
    samples.reserve(n_queries - warmup);
    double scored = 0.0;
    for (std::size_t i = 0; i < n_queries; ++i) {
        const auto start = std::chrono::steady_clock::now();
        const std::size_t count = search(i);
        const Millis elapsed = std::chrono::steady_clock::now() - start;
        if (i < warmup) continue;
        samples.push_back(elapsed.count());
        scored += static_cast<double>(count);
    }
    LatencyRecord record;
    record.label = std::move(label);
    record.corpus_size = corpus_size;
    record.n_queries = samples.size();
    record.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
    record.scored_mean = scored / static_cast<double>(samples.size());
    std::sort(samples.begin(), samples.end());
    record.p50_ms = percentile(samples, 50.0);
    record.p95_ms = percentile(samples, 95.0);
    return record;
}

/// (T_build + T_search) / N_queries, in milliseconds.
inline double amortized_latency(Millis build, Millis search_total, std::size_t n_queries) {
    if (n_queries == 0) raise(ErrorKind::Domain, "amortized latency needs >= 1 query");
    return (build.count() + search_total.count()) / static_cast<double>(n_queries);
}

/// Least squares on (log size, log value): value ~= coefficient * size^exponent.
inline PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points) {
    if (points.size() < 3) raise(ErrorKind::Domain, "power-law fit needs >= 3 points");
    std::vector<double> xs, ys;
    for (const auto& [size, value] : points) {
        if (!(size > 0.0) || !(value > 0.0)) {
            raise(ErrorKind::Domain, "power-law fit needs positive sizes and values");
        }
        xs.push_back(std::log(size));
        ys.push_back(std::log(value));
    }
    std::vector<double> distinct = xs;
    std::sort(distinct.begin(), distinct.end());
    if (std::adjacent_find(distinct.begin(), distinct.end()) != distinct.end()) {
        raise(ErrorKind::Domain, "power-law fit needs distinct sizes");
    }
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    PowerLawFit fit;
    fit.exponent = sxy / sxx;
    fit.coefficient = std::exp(my - fit.exponent * mx);
    double ss_res = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (my + fit.exponent * (xs[i] - mx));
        ss_res += r * r;
    }
    fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    return fit;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Seeded Gaussian-mixture corpus. Rows are drawn in order from one stream,
/// so a smaller corpus is a prefix of a larger one with the same settings.
struct SyntheticCorpusSpec {
    std::size_t dim = 32;
    std::size_t clusters = 64;
    float spread = 0.35f;
    std::uint64_t seed = 0;
};

inline EmbeddingMatrix make_synthetic_corpus(std::size_t count, const SyntheticCorpusSpec& spec) {
    Rng center_rng(derive_seed(spec.seed, "corpus-centers"));
    Rng row_rng(derive_seed(spec.seed, "corpus-rows"));
    std::normal_distribution<float> normal(0.0f, 1.0f);
    const std::size_t clusters = std::max<std::size_t>(spec.clusters, 1);
    Matrix centers(clusters, spec.dim);
    for (float& v : centers.values()) v = normal(center_rng.engine());
    Matrix rows(count, spec.dim);
    for (std::size_t i = 0; i < count; ++i) {
        const auto c = centers.row(row_rng.uniform_index(clusters));
        auto r = rows.row(i);
        for (std::size_t j = 0; j < spec.dim; ++j) r[j] = c[j] + spec.spread * normal(row_rng.engine());
    }
    return EmbeddingMatrix(std::move(rows));
}

/// Random token matrices standing in for encoder output, one per query.
inline std::vector<QueryTokens> make_synthetic_queries(std::size_t count, std::size_t tokens,
                                                       std::size_t dim, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "query-tokens"));
    std::normal_distribution<float> normal(0.0f, 1.0f);
    std::vector<QueryTokens> out;
    out.reserve(count);
    for (std::size_t q = 0; q < count; ++q) {
        Matrix m(tokens, dim);
        for (float& v : m.values()) v = normal(rng.engine());
        out.push_back({"q" + std::to_string(q), EmbeddingMatrix(std::move(m))});
    }
    return out;
}

/// Mean of a query's token rows, the pooled vector the flat baseline uses.
inline std::vector<float> mean_pool(const Matrix& tokens) {
    std::vector<float> pooled(tokens.cols(), 0.0f);
    for (std::size_t i = 0; i < tokens.rows(); ++i) {
        const auto r = tokens.row(i);
        for (std::size_t j = 0; j < pooled.size(); ++j) pooled[j] += r[j];
    }
    for (float& v : pooled) v /= static_cast<float>(std::max<std::size_t>(tokens.rows(), 1));
    return pooled;
}

// ---------------------------------------------------------------------------
// Scaling sweep
// ---------------------------------------------------------------------------

struct SweepConfig {
    std::vector<std::size_t> sizes;
    std::vector<std::string> modes = {"exhaustive", "efficient-1", "flat-ip"};
    SyntheticCorpusSpec corpus;
    HyperheadShape hyperhead;
    std::size_t query_tokens = 8;
    std::size_t queries = 10;
    std::size_t warmup = 3;
    std::size_t k = 100;
    std::size_t degree = kDefaultGraphDegree;
    std::uint64_t seed = 0;
    unsigned build_threads = detail::default_threads();
};

struct SweepReport {
    std::vector<LatencyRecord> records;
    std::vector<std::pair<std::size_t, double>> graph_build_seconds;
};

inline bool is_efficient_mode(std::string_view mode) {
    return mode == "efficient-1" || mode == "efficient-2";
}

inline SearchConfig preset_config(std::string_view mode, std::size_t k, std::uint64_t seed) {
    if (mode == "efficient-1") return efficient_1(k, seed);
    if (mode == "efficient-2") return efficient_2(k, seed);
    raise(ErrorKind::Usage, "no graph-search preset named \"" + std::string(mode) + "\"");
}

inline void validate_sweep(const SweepConfig& config) {
    if (config.sizes.empty()) raise(ErrorKind::Validation, "sweep needs at least one corpus size");
    if (!std::is_sorted(config.sizes.begin(), config.sizes.end()) ||
        std::adjacent_find(config.sizes.begin(), config.sizes.end()) != config.sizes.end()) {
        raise(ErrorKind::Validation, "sweep sizes must be strictly ascending");
    }
    for (const auto& mode : config.modes) {
        if (mode != "exhaustive" && mode != "flat-ip" && !is_efficient_mode(mode)) {
            raise(ErrorKind::Usage, "unknown sweep mode \"" + mode + "\"");
        }
    }
    if (config.corpus.dim != config.hyperhead.encoder_dim ||
        config.corpus.dim != config.hyperhead.qnet_dim) {
        raise(ErrorKind::Validation, "corpus dim must equal the hyperhead encoder and q-net widths");
    }
}

/// Sees every graph search a sweep runs, with the graph degree it used.
using SearchObserver = std::function<void(const SearchConfig&, const SearchStats&, std::size_t)>;

/// Runs every mode at every size on a synthetic corpus. Timing is serial so
/// per-query latency is uncontended. `progress`, when set, is called after
/// each record.
inline SweepReport scaling_sweep(const SweepConfig& config,
                                 const std::function<void(const LatencyRecord&)>& progress = {},
                                 const SearchObserver& observe = {}) {
    validate_sweep(config);
    const auto hyperhead = make_random_hyperhead(config.hyperhead, derive_seed(config.seed, "hyperhead"));
    const auto queries = make_synthetic_queries(config.queries + config.warmup, config.query_tokens,
                                                config.corpus.dim, derive_seed(config.seed, "queries"));
    SyntheticCorpusSpec corpus_spec = config.corpus;
    corpus_spec.seed = derive_seed(config.seed, "corpus");
    const auto full = make_synthetic_corpus(config.sizes.back(), corpus_spec);

    const bool needs_graph = std::any_of(config.modes.begin(), config.modes.end(),
                                         [](const std::string& m) { return is_efficient_mode(m); });
    SweepReport report;
    for (const std::size_t size : config.sizes) {
        Matrix prefix(size, full.dim());
        std::copy_n(full.matrix().values().begin(), size * full.dim(), prefix.values().begin());
        const EmbeddingMatrix corpus(std::move(prefix));

        TimedGraph graph;
        if (needs_graph) {
            graph = build_graph_timed(corpus, config.degree, config.build_threads);
            report.graph_build_seconds.emplace_back(size, graph.build_seconds);
        }

        for (const auto& mode : config.modes) {
            LatencyRecord record;
            if (mode == "exhaustive") {
                record = time_search(mode, size, queries.size(), [&](std::size_t i) {
                    const auto qnet = generate_qnet(queries[i].tokens, hyperhead);
                    return exhaustive_search(corpus, qnet, config.k).stats.scored_count;
                }, config.warmup);
            } else if (mode == "flat-ip") {
                // Flat index "build" is materialising the contiguous F32 matrix.
                const auto build_start = std::chrono::steady_clock::now();
                const EmbeddingMatrix index(corpus.matrix());
                const Millis build = std::chrono::steady_clock::now() - build_start;
                std::vector<std::vector<float>> pooled;
                for (const auto& q : queries) pooled.push_back(mean_pool(q.tokens.matrix()));
                record = time_search(mode, size, queries.size(), [&](std::size_t i) {
                    return flat_ip_search(index, pooled[i], config.k).stats.scored_count;
                }, config.warmup);
                const Millis total(record.mean_ms * static_cast<double>(record.n_queries));
                record.mean_ms = amortized_latency(build, total, record.n_queries);
                record.build_s = build.count() / 1000.0;
            } else {
                record = time_search(mode, size, queries.size(), [&](std::size_t i) {
                    const auto qnet = generate_qnet(queries[i].tokens, hyperhead);
                    const auto search_config =
                        preset_config(mode, config.k, derive_seed(config.seed, "search:" + queries[i].query_id));
                    const auto result = efficient_search(corpus, graph.graph, qnet, search_config);
                    if (observe) observe(search_config, result.stats, graph.graph.degree);
                    return result.stats.scored_count;
                }, config.warmup);
                record.build_s = graph.build_seconds;
            }
            if (progress) progress(record);
            report.records.push_back(std::move(record));
        }
    }
    return report;
}

/// Power-law fit of mean latency against corpus size for one mode.
inline PowerLawFit fit_mode(const SweepReport& report, std::string_view mode) {
    std::vector<std::pair<double, double>> points;
    for (const auto& r : report.records) {
        if (r.label == mode) points.emplace_back(static_cast<double>(r.corpus_size), r.mean_ms);
    }
    return fit_power_law(points);
}

inline void write_latency_csv(std::ostream& out, std::span<const LatencyRecord> records) {
    out << "label,corpus_size,n_queries,mean_ms,p50_ms,p95_ms,scored_mean,build_s\n";
    for (const auto& r : records) {
        out << r.label << ',' << r.corpus_size << ',' << r.n_queries << ','
            << detail::format_double(r.mean_ms) << ',' << detail::format_double(r.p50_ms) << ','
            << detail::format_double(r.p95_ms) << ',' << detail::format_double(r.scored_mean) << ','
            << detail::format_double(r.build_s) << '\n';
    }
}

inline void write_fit_tsv(std::ostream& out,
                          std::span<const std::pair<std::string, PowerLawFit>> fits) {
    out << "label\texponent\tcoefficient\tr2\n";
    for (const auto& [label, f] : fits) {
        out << label << '\t' << detail::format_double(f.exponent) << '\t'
            << detail::format_double(f.coefficient) << '\t' << detail::format_double(f.r_squared)
            << '\n';
    }
}

/// Fits for every mode in the report plus graph construction time.
inline std::vector<std::pair<std::string, PowerLawFit>> sweep_fits(const SweepReport& report,
                                                                   const SweepConfig& config) {
    std::vector<std::pair<std::string, PowerLawFit>> fits;
    if (config.sizes.size() < 3) return fits;
    for (const auto& mode : config.modes) fits.emplace_back(mode, fit_mode(report, mode));
    if (!report.graph_build_seconds.empty()) {
        std::vector<std::pair<double, double>> points;
        for (const auto& [size, s] : report.graph_build_seconds) {
            points.emplace_back(static_cast<double>(size), std::max(s, 1e-9));
        }
        fits.emplace_back("graph-build", fit_power_law(points));
    }
    return fits;
}

// ---------------------------------------------------------------------------
// Sweep config: flat "key = value" lines, '#' comments.
// ---------------------------------------------------------------------------

inline SweepConfig read_sweep_config(const std::filesystem::path& path) {
    SweepConfig config;
    std::map<std::string, std::size_t> seen;
    detail::for_each_line(path, [&](std::string_view raw, std::size_t number) {
        auto line = raw.substr(0, raw.find('#'));
        line = detail::trim(line);
        if (line.empty()) return;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) detail::parse_failure(path, number, "expected key = value");
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        if (!seen.emplace(key, number).second) detail::parse_failure(path, number, key + ": duplicate key");
        auto fail = [&](const std::string& what) { detail::parse_failure(path, number, key + ": " + what); };
        auto integer = [&]() -> std::size_t {
            const auto v = detail::parse_number<std::size_t>(value);
            if (!v) fail("expected a non-negative integer, got \"" + std::string(value) + "\"");
            return *v;
        };
        auto positive = [&]() {
            const auto v = integer();
            if (v == 0) fail("must be positive");
            return v;
        };
        auto list = [&]() {
            std::vector<std::string> items;
            for (auto item : detail::split(value, ',')) {
                item = detail::trim(item);
                if (item.empty()) fail("empty list item");
                items.emplace_back(item);
            }
            return items;
        };

        if (key == "sizes") {
            config.sizes.clear();
            for (const auto& item : list()) {
                const auto v = detail::parse_number<std::size_t>(item);
                if (!v || *v < 2) fail("bad corpus size \"" + item + "\"");
                config.sizes.push_back(*v);
            }
        } else if (key == "modes") {
            config.modes = list();
        } else if (key == "dim") {
            config.corpus.dim = config.hyperhead.encoder_dim = config.hyperhead.qnet_dim = positive();
        } else if (key == "clusters") {
            config.corpus.clusters = positive();
        } else if (key == "spread") {
            const auto v = detail::parse_number<float>(value);
            if (!v || !(*v > 0.0f)) fail("expected a positive number");
            config.corpus.spread = *v;
        } else if (key == "attention_dim") {
            config.hyperhead.attention_dim = positive();
        } else if (key == "learned_queries") {
            config.hyperhead.query_count = positive();
        } else if (key == "qnet_layers") {
            config.hyperhead.qnet_layers = positive();
        } else if (key == "query_tokens") {
            config.query_tokens = positive();
        } else if (key == "queries") {
            config.queries = positive();
        } else if (key == "warmup") {
            config.warmup = integer();
        } else if (key == "k") {
            config.k = positive();
        } else if (key == "degree") {
            config.degree = positive();
        } else if (key == "seed") {
            config.seed = integer();
        } else {
            fail("unknown key");
        }
    });
    validate_sweep(config);
    return config;
}

} // namespace hyperscore
