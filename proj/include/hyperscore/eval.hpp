#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hyperscore/detail/text.hpp"
#include "hyperscore/error.hpp"
#include "hyperscore/search.hpp"

namespace hyperscore {

/// query_id -> doc_key -> graded relevance (>= 0).
using Qrels = std::map<std::string, std::map<std::string, int>>;

struct RunEntry {
    std::string doc_key;
    double score = 0.0;

    friend bool operator==(const RunEntry&, const RunEntry&) = default;
};

/// query_id -> entries in rank order (descending score, ascending doc_key).
using RunFile = std::map<std::string, std::vector<RunEntry>>;

inline bool run_order(const RunEntry& a, const RunEntry& b) {
    return a.score > b.score || (a.score == b.score && a.doc_key < b.doc_key);
}

// ---------------------------------------------------------------------------
// File IO
// ---------------------------------------------------------------------------

/// Reads "query_id Q0 doc_key rank score tag". The rank column is ignored;
/// ranks are re-derived from the scores.
inline RunFile read_run(const std::filesystem::path& path) {
    RunFile run;
    std::map<std::string, std::set<std::string>> seen;
    detail::for_each_line(path, [&](std::string_view line, std::size_t number) {
        if (detail::trim(line).empty()) return;
        const auto f = detail::split_whitespace(line);
        if (f.size() != 6) {
            detail::parse_failure(path, number,
                                  "run line needs 6 fields, got " + std::to_string(f.size()));
        }
        const auto rank = detail::parse_number<long long>(f[3]);
        const auto score = detail::parse_number<double>(f[4]);
        if (!rank) detail::parse_failure(path, number, "bad rank \"" + f[3] + "\"");
        if (!score || !std::isfinite(*score)) {
            detail::parse_failure(path, number, "bad score \"" + f[4] + "\"");
        }
        if (!seen[f[0]].insert(f[2]).second) {
            detail::parse_failure(path, number, "duplicate document " + f[2] + " for query " + f[0]);
        }
        run[f[0]].push_back({f[2], *score});
    });
    for (auto& [qid, entries] : run) std::stable_sort(entries.begin(), entries.end(), run_order);
    return run;
}

namespace detail {
inline std::string format_score(double score) {
    const auto narrow = static_cast<float>(score);
    return static_cast<double>(narrow) == score ? format_float(narrow) : format_double(score);
}
} // namespace detail

inline void write_run(const RunFile& run, const std::filesystem::path& path, std::string_view tag) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise(ErrorKind::Io, "cannot open for writing: " + path.string());
    for (const auto& [qid, entries] : run) {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            out << qid << " Q0 " << entries[i].doc_key << ' ' << (i + 1) << ' '
                << detail::format_score(entries[i].score) << ' ' << tag << '\n';
        }
    }
    if (!out) raise(ErrorKind::Io, "write failed: " + path.string());
}

/// Reads "query_id iteration doc_key grade".
inline Qrels read_qrels(const std::filesystem::path& path) {
    Qrels qrels;
    detail::for_each_line(path, [&](std::string_view line, std::size_t number) {
        if (detail::trim(line).empty()) return;
        const auto f = detail::split_whitespace(line);
        if (f.size() != 4) {
            detail::parse_failure(path, number,
                                  "qrels line needs 4 fields, got " + std::to_string(f.size()));
        }
        const auto grade = detail::parse_number<int>(f[3]);
        if (!grade) detail::parse_failure(path, number, "bad grade \"" + f[3] + "\"");
        if (*grade < 0) detail::parse_failure(path, number, "negative grade " + f[3]);
        qrels[f[0]][f[2]] = *grade;
    });
    return qrels;
}

/// Reads "internal_id<TAB>external_key" lines into a dense id -> key table.
inline std::vector<std::string> read_doc_keys(const std::filesystem::path& path,
                                              std::size_t count) {
    std::vector<std::string> keys(count);
    std::vector<bool> filled(count, false);
    detail::for_each_line(path, [&](std::string_view line, std::size_t number) {
        if (detail::trim(line).empty()) return;
        const auto f = detail::split(line, '\t');
        if (f.size() != 2) detail::parse_failure(path, number, "expected internal_id<TAB>key");
        const auto id = detail::parse_number<std::size_t>(f[0]);
        if (!id || *id >= count) detail::parse_failure(path, number, "bad internal id");
        keys[*id] = std::string(f[1]);
        filled[*id] = true;
    });
    for (std::size_t i = 0; i < count; ++i) {
        if (!filled[i]) raise(ErrorKind::Validation, path.string() + ": no key for id " + std::to_string(i));
    }
    return keys;
}

/// Appends one engine ranking to a run; without a key table doc keys are the
/// decimal internal ids.
inline void append_ranking(RunFile& run, const RankedList& ranking,
                           const std::vector<std::string>* doc_keys = nullptr) {
    auto& entries = run[ranking.query_id];
    entries.clear();
    entries.reserve(ranking.entries.size());
    for (const auto& e : ranking.entries) {
        entries.push_back({doc_keys ? (*doc_keys)[e.id] : std::to_string(e.id),
                           static_cast<double>(e.score)});
    }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct MetricResult {
    std::map<std::string, double> per_query;
    double mean = 0.0;
    std::size_t missing_qrels = 0; // run queries absent from qrels
    std::size_t no_relevant = 0;   // excluded: nothing relevant judged
    std::size_t missing_run = 0;   // p-MRR only: query absent from one run
};

namespace detail {

inline void finish(MetricResult& result) {
    double sum = 0.0;
    for (const auto& [qid, v] : result.per_query) sum += v;
    result.mean = result.per_query.empty() ? 0.0 : sum / static_cast<double>(result.per_query.size());
}

/// Calls fn(query_id, entries, judged) for every run query that has at least
/// one judged document passing `is_relevant`; counts the rest.
template <typename Pred, typename Fn>
void for_each_judged(const RunFile& run, const Qrels& qrels, MetricResult& result,
                     Pred&& is_relevant, Fn&& fn) {
    for (const auto& [qid, entries] : run) {
        const auto it = qrels.find(qid);
        if (it == qrels.end()) {
            ++result.missing_qrels;
            continue;
        }
        const bool any = std::any_of(it->second.begin(), it->second.end(),
                                     [&](const auto& kv) { return is_relevant(kv.second); });
        if (!any) {
            ++result.no_relevant;
            continue;
        }
        fn(qid, entries, it->second);
    }
}

inline int grade_of(const std::map<std::string, int>& judged, const std::string& key) {
    const auto it = judged.find(key);
    return it == judged.end() ? 0 : it->second;
}

} // namespace detail

/// nDCG@k with linear gains and log2(rank + 1) discounts.
inline MetricResult ndcg_at_k(const RunFile& run, const Qrels& qrels, std::size_t k) {
    if (k == 0) raise(ErrorKind::Domain, "ndcg cutoff must be >= 1");
    MetricResult result;
    detail::for_each_judged(run, qrels, result, [](int g) { return g > 0; },
                            [&](const std::string& qid, const auto& entries, const auto& judged) {
        double dcg = 0.0;
        for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) {
            dcg += detail::grade_of(judged, entries[i].doc_key) / std::log2(static_cast<double>(i) + 2.0);
        }
        std::vector<int> grades;
        for (const auto& [key, g] : judged) {
            if (g > 0) grades.push_back(g);
        }
        std::sort(grades.begin(), grades.end(), std::greater<>());
        double ideal = 0.0;
        for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
            ideal += grades[i] / std::log2(static_cast<double>(i) + 2.0);
        }
        result.per_query[qid] = dcg / ideal;
    });
    detail::finish(result);
    return result;
}

/// Reciprocal rank of the first document graded >= binarize_at, within the
/// cutoff when one is given.
inline MetricResult mrr(const RunFile& run, const Qrels& qrels, std::optional<std::size_t> cutoff,
                        int binarize_at = 1) {
    if (cutoff && *cutoff == 0) raise(ErrorKind::Domain, "mrr cutoff must be >= 1");
    MetricResult result;
    detail::for_each_judged(run, qrels, result, [&](int g) { return g >= binarize_at; },
                            [&](const std::string& qid, const auto& entries, const auto& judged) {
        const std::size_t limit = cutoff ? std::min(*cutoff, entries.size()) : entries.size();
        double rr = 0.0;
        for (std::size_t i = 0; i < limit; ++i) {
            if (detail::grade_of(judged, entries[i].doc_key) >= binarize_at) {
                rr = 1.0 / static_cast<double>(i + 1);
                break;
            }
        }
        result.per_query[qid] = rr;
    });
    detail::finish(result);
    return result;
}

inline MetricResult recall_at_k(const RunFile& run, const Qrels& qrels, std::size_t k,
                                int binarize_at = 1) {
    if (k == 0) raise(ErrorKind::Domain, "recall cutoff must be >= 1");
    MetricResult result;
    detail::for_each_judged(run, qrels, result, [&](int g) { return g >= binarize_at; },
                            [&](const std::string& qid, const auto& entries, const auto& judged) {
        std::size_t relevant = 0;
        for (const auto& [key, g] : judged) relevant += g >= binarize_at;
        std::size_t hits = 0;
        for (std::size_t i = 0; i < std::min(k, entries.size()); ++i) {
            hits += detail::grade_of(judged, entries[i].doc_key) >= binarize_at;
        }
        result.per_query[qid] = static_cast<double>(hits) / static_cast<double>(relevant);
    });
    detail::finish(result);
    return result;
}

/// Paired rank change of the first relevant document between two runs:
/// 100 * (r_og / r_new - 1) when it moves up, 100 * (1 - r_new / r_og) when
/// it moves down. Halving or doubling the rank gives +100 / -100. A relevant document missing from one run is placed just
/// past that run's end; queries where neither run retrieves one are excluded.
inline MetricResult p_mrr(const RunFile& original, const RunFile& modified,
                          const Qrels& qrels_modified, int binarize_at = 1) {
    MetricResult result;
    auto first_relevant = [&](const std::vector<RunEntry>& entries,
                              const std::map<std::string, int>& judged) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (detail::grade_of(judged, entries[i].doc_key) >= binarize_at) return i + 1;
        }
        return std::nullopt;
    };
    std::set<std::string> queries;
    for (const auto& [qid, e] : original) queries.insert(qid);
    for (const auto& [qid, e] : modified) queries.insert(qid);
    for (const auto& qid : queries) {
        const auto a = original.find(qid);
        const auto b = modified.find(qid);
        if (a == original.end() || b == modified.end()) {
            ++result.missing_run;
            continue;
        }
        const auto judged = qrels_modified.find(qid);
        if (judged == qrels_modified.end()) {
            ++result.missing_qrels;
            continue;
        }
        const auto r_og = first_relevant(a->second, judged->second);
        const auto r_new = first_relevant(b->second, judged->second);
        if (!r_og && !r_new) {
            ++result.no_relevant;
            continue;
        }
        const double og = static_cast<double>(r_og.value_or(a->second.size() + 1));
        const double nw = static_cast<double>(r_new.value_or(b->second.size() + 1));
        result.per_query[qid] = nw <= og ? 100.0 * (og / nw - 1.0) : 100.0 * (1.0 - nw / og);
    }
    detail::finish(result);
    return result;
}

// ---------------------------------------------------------------------------
// Metric names ("ndcg@10", "mrr", "mrr@10", "recall@1000", "p-mrr")
// ---------------------------------------------------------------------------

enum class MetricKind { Ndcg, Mrr, Recall, PMrr };

struct MetricSpec {
    MetricKind kind = MetricKind::Ndcg;
    std::optional<std::size_t> cutoff;
    std::string name;
};

inline MetricSpec parse_metric(std::string_view text) {
    const std::string name(detail::trim(text));
    const auto at = name.find('@');
    const std::string base = name.substr(0, at);
    std::optional<std::size_t> cutoff;
    if (at != std::string::npos) {
        cutoff = detail::parse_number<std::size_t>(std::string_view(name).substr(at + 1));
        if (!cutoff || *cutoff == 0) raise(ErrorKind::Usage, "bad cutoff in metric \"" + name + "\"");
    }
    if (base == "ndcg") {
        if (!cutoff) raise(ErrorKind::Usage, "ndcg needs a cutoff, e.g. ndcg@10");
        return {MetricKind::Ndcg, cutoff, name};
    }
    if (base == "mrr" || base == "rr") return {MetricKind::Mrr, cutoff, name};
    if (base == "recall" || base == "r") {
        if (!cutoff) raise(ErrorKind::Usage, "recall needs a cutoff, e.g. recall@1000");
        return {MetricKind::Recall, cutoff, name};
    }
    if (base == "p-mrr" || base == "pmrr") {
        if (cutoff) raise(ErrorKind::Usage, "p-mrr takes no cutoff");
        return {MetricKind::PMrr, std::nullopt, name};
    }
    raise(ErrorKind::Usage, "unknown metric \"" + name + "\"");
}

/// "metric<TAB>query_id<TAB>value" rows, then "metric<TAB>all<TAB>mean".
inline void write_metric_rows(std::ostream& out, const std::string& metric,
                              const MetricResult& result) {
    for (const auto& [qid, v] : result.per_query) {
        out << metric << '\t' << qid << '\t' << detail::format_double(v) << '\n';
    }
    out << metric << '\t' << "all" << '\t' << detail::format_double(result.mean) << '\n';
}

} // namespace hyperscore
