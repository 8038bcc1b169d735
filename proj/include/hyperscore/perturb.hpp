#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "hyperscore/detail/rng.hpp"
#include "hyperscore/detail/text.hpp"
#include "hyperscore/error.hpp"

namespace hyperscore {

struct Query {
    std::string query_id;
    std::string text;

    friend bool operator==(const Query&, const Query&) = default;
};

/// token -> replacement candidates (each differs from the token).
using SynonymLexicon = std::map<std::string, std::vector<std::string>>;

/// lower-case key -> adjacent keys.
using KeyboardMap = std::map<char, std::string>;

/// Output of generators that may find nothing to change. When `unchanged` is
/// set the query is returned as-is and `warning` says why.
struct PerturbResult {
    Query query;
    bool unchanged = false;
    std::string warning;
};

enum class Perturbation { Misspelling, Naturality, Ordering, Paraphrasing, Synonymizing };

constexpr std::string_view to_string(Perturbation p) noexcept {
    switch (p) {
    case Perturbation::Misspelling: return "misspelling";
    case Perturbation::Naturality: return "naturality";
    case Perturbation::Ordering: return "ordering";
    case Perturbation::Paraphrasing: return "paraphrasing";
    case Perturbation::Synonymizing: return "synonymizing";
    }
    return "unknown";
}

inline Perturbation parse_perturbation(std::string_view name) {
    for (auto p : {Perturbation::Misspelling, Perturbation::Naturality, Perturbation::Ordering,
                   Perturbation::Paraphrasing, Perturbation::Synonymizing}) {
        if (name == to_string(p)) return p;
    }
    if (name == "misspell") return Perturbation::Misspelling;
    if (name == "reorder") return Perturbation::Ordering;
    if (name == "synonymize") return Perturbation::Synonymizing;
    if (name == "paraphrase") return Perturbation::Paraphrasing;
    raise(ErrorKind::Usage, "unknown perturbation \"" + std::string(name) + "\"");
}

// QWERTY adjacency (same rows, and the row above/below).
inline const KeyboardMap& qwerty_neighbors() {
    static const KeyboardMap map = {
        {'q', "wa"},   {'w', "qeas"},   {'e', "wrsd"},  {'r', "etdf"},  {'t', "ryfg"},
        {'y', "tugh"}, {'u', "yihj"},   {'i', "uojk"},  {'o', "ipkl"},  {'p', "ol"},
        {'a', "qwsz"}, {'s', "weadzx"}, {'d', "erfsxc"}, {'f', "rtdgcv"}, {'g', "tyfhvb"},
        {'h', "yugjbn"}, {'j', "uihknm"}, {'k', "iojlm"}, {'l', "opk"}, {'z', "asx"},
        {'x', "zsdc"}, {'c', "xdfv"},   {'v', "cfgb"},  {'b', "vghn"},  {'n', "bhjm"},
        {'m', "njk"},
    };
    return map;
}

/// Reads "key<TAB>neighbors" lines (e.g. "q\twa").
inline KeyboardMap read_keyboard_map(const std::filesystem::path& path) {
    KeyboardMap map;
    detail::for_each_line(path, [&](std::string_view line, std::size_t number) {
        if (detail::trim(line).empty() || line.front() == '#') return;
        const auto f = detail::split(line, '\t');
        if (f.size() != 2 || f[0].size() != 1 || f[1].empty()) {
            detail::parse_failure(path, number, "expected key<TAB>neighbors");
        }
        map[f[0][0]] = std::string(f[1]);
    });
    return map;
}

namespace detail {

inline Rng perturb_rng(std::uint64_t seed, Perturbation kind, const Query& q) {
    return Rng(derive_seed(seed, std::string(to_string(kind)) + ":" + q.query_id));
}

inline std::vector<std::string> tokens_of(const Query& q) { return split_whitespace(q.text); }

/// A keyboard neighbour of `c`, keeping its case; 0 when `c` has none.
inline char neighbor_of(char c, const KeyboardMap& keys, Rng& rng) {
    const bool upper = std::isupper(static_cast<unsigned char>(c)) != 0;
    const auto it = keys.find(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (it == keys.end() || it->second.empty()) return 0;
    const char pick = it->second[rng.uniform_index(it->second.size())];
    return upper ? static_cast<char>(std::toupper(static_cast<unsigned char>(pick))) : pick;
}

/// One character edit of `token`; may return the token unchanged (e.g. a
/// swap of equal letters), in which case the caller draws again.
inline std::string single_edit(const std::string& token, const KeyboardMap& keys, Rng& rng) {
    std::string out = token;
    switch (rng.uniform_index(4)) {
    case 0: { // adjacent transposition
        const auto p = rng.uniform_index(token.size() - 1);
        std::swap(out[p], out[p + 1]);
        break;
    }
    case 1: // deletion
        out.erase(rng.uniform_index(token.size()), 1);
        break;
    case 2: { // insertion of a key adjacent to a neighbouring letter
        const auto p = rng.uniform_index(token.size() + 1);
        const char anchor = p == 0 ? token[0] : token[p - 1];
        if (const char c = neighbor_of(anchor, keys, rng)) out.insert(out.begin() + static_cast<std::ptrdiff_t>(p), c);
        break;
    }
    default: { // substitution by an adjacent key
        const auto p = rng.uniform_index(token.size());
        if (const char c = neighbor_of(token[p], keys, rng)) out[p] = c;
        break;
    }
    }
    return out;
}

} // namespace detail

inline constexpr std::size_t kMinMisspellLength = 4;

/// Introduces one typo into one token of length >= 4.
inline PerturbResult misspell(const Query& q, std::uint64_t seed,
                              const KeyboardMap& keys = qwerty_neighbors()) {
    auto tokens = detail::tokens_of(q);
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].size() >= kMinMisspellLength) eligible.push_back(i);
    }
    if (eligible.empty()) {
        return {q, true, "no token of length >= " + std::to_string(kMinMisspellLength)};
    }
    auto rng = detail::perturb_rng(seed, Perturbation::Misspelling, q);
    const std::size_t target = eligible[rng.uniform_index(eligible.size())];
    std::string edited;
    for (int attempt = 0; attempt < 64; ++attempt) {
        edited = detail::single_edit(tokens[target], keys, rng);
        if (edited != tokens[target]) break;
    }
    if (edited == tokens[target]) edited.erase(rng.uniform_index(edited.size()), 1);
    tokens[target] = std::move(edited);
    return {{q.query_id, detail::join(tokens, " ")}, false, {}};
}

/// Number of terms naturality removes from an n-term query: ceil(n/5), at least 1.
constexpr std::size_t naturality_removals(std::size_t n) noexcept {
    return std::max<std::size_t>(1, (n + 4) / 5);
}

/// Drops 20% of the terms (rounded up, at least one), keeping survivor order.
inline Query naturality(const Query& q, std::uint64_t seed) {
    const auto tokens = detail::tokens_of(q);
    if (tokens.size() < 2) {
        raise(ErrorKind::Domain, "naturality needs >= 2 tokens, query " + q.query_id + " has " +
                                     std::to_string(tokens.size()));
    }
    auto rng = detail::perturb_rng(seed, Perturbation::Naturality, q);
    std::vector<std::size_t> order(tokens.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    std::vector<bool> drop(tokens.size(), false);
    for (std::size_t i = 0; i < naturality_removals(tokens.size()); ++i) drop[order[i]] = true;
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!drop[i]) kept.push_back(tokens[i]);
    }
    return {q.query_id, detail::join(kept, " ")};
}

/// Uniform random permutation of the terms other than the identity.
inline Query reorder(const Query& q, std::uint64_t seed) {
    const auto tokens = detail::tokens_of(q);
    if (tokens.size() < 2) {
        raise(ErrorKind::Domain, "reorder needs >= 2 tokens, query " + q.query_id + " has " +
                                     std::to_string(tokens.size()));
    }
    const bool all_same = std::all_of(tokens.begin(), tokens.end(),
                                      [&](const std::string& t) { return t == tokens[0]; });
    auto rng = detail::perturb_rng(seed, Perturbation::Ordering, q);
    std::vector<std::size_t> perm(tokens.size());
    std::vector<std::string> out(tokens.size());
    for (;;) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);
        for (std::size_t i = 0; i < perm.size(); ++i) out[i] = tokens[perm[i]];
        const bool identity = std::is_sorted(perm.begin(), perm.end());
        if (!identity && (all_same || out != tokens)) break;
    }
    return {q.query_id, detail::join(out, " ")};
}

/// Replaces one token that has a lexicon entry with one of its alternatives.
inline PerturbResult synonymize(const Query& q, const SynonymLexicon& lexicon, std::uint64_t seed) {
    auto tokens = detail::tokens_of(q);
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto it = lexicon.find(tokens[i]);
        if (it != lexicon.end() && !it->second.empty()) eligible.push_back(i);
    }
    if (eligible.empty()) return {q, true, "no token has a lexicon entry"};
    auto rng = detail::perturb_rng(seed, Perturbation::Synonymizing, q);
    const std::size_t target = eligible[rng.uniform_index(eligible.size())];
    const auto& alternatives = lexicon.at(tokens[target]);
    tokens[target] = alternatives[rng.uniform_index(alternatives.size())];
    return {{q.query_id, detail::join(tokens, " ")}, false, {}};
}

/// Reads "token<TAB>alt1,alt2,..." lines.
inline SynonymLexicon read_lexicon(const std::filesystem::path& path) {
    SynonymLexicon lexicon;
    detail::for_each_line(path, [&](std::string_view line, std::size_t number) {
        if (detail::trim(line).empty()) return;
        const auto f = detail::split(line, '\t');
        if (f.size() != 2 || f[0].empty()) detail::parse_failure(path, number, "expected token<TAB>alternatives");
        std::vector<std::string> alts;
        for (auto alt : detail::split(f[1], ',')) {
            alt = detail::trim(alt);
            if (alt.empty()) continue;
            if (alt == f[0]) detail::parse_failure(path, number, "alternative equals its token");
            alts.emplace_back(alt);
        }
        if (alts.empty()) detail::parse_failure(path, number, "no alternatives");
        lexicon[std::string(f[0])] = std::move(alts);
    });
    return lexicon;
}

struct ParaphraseSet {
    std::map<std::string, Query> by_id;
    std::vector<std::string> warnings;
};

/// Reads externally generated paraphrases, "query_id<TAB>paraphrase".
/// A repeated id keeps the last line and records a warning.
inline ParaphraseSet load_paraphrases(const std::filesystem::path& path) {
    ParaphraseSet set;
    detail::for_each_line(path, [&](std::string_view line, std::size_t number) {
        if (detail::trim(line).empty()) return;
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0 || detail::trim(line.substr(tab + 1)).empty()) {
            detail::parse_failure(path, number, "expected query_id<TAB>paraphrase");
        }
        std::string id(line.substr(0, tab));
        if (set.by_id.count(id)) {
            set.warnings.push_back(path.string() + ":" + std::to_string(number) +
                                   ": duplicate paraphrase for " + id + ", keeping the last");
        }
        set.by_id[id] = Query{id, std::string(line.substr(tab + 1))};
    });
    return set;
}

/// Reads "query_id<TAB>text" lines.
inline std::vector<Query> read_queries(const std::filesystem::path& path) {
    std::vector<Query> queries;
    detail::for_each_line(path, [&](std::string_view line, std::size_t number) {
        if (detail::trim(line).empty()) return;
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0) {
            detail::parse_failure(path, number, "expected query_id<TAB>text");
        }
        Query q{std::string(line.substr(0, tab)), std::string(line.substr(tab + 1))};
        if (detail::split_whitespace(q.text).empty()) {
            detail::parse_failure(path, number, "query " + q.query_id + " has no tokens");
        }
        queries.push_back(std::move(q));
    });
    return queries;
}

/// Percentage drop relative to clean performance; negative means improvement.
inline double relative_drop(double clean, double perturbed) {
    if (!(clean > 0.0)) {
        raise(ErrorKind::Domain, "relative drop undefined for clean score " + detail::format_double(clean));
    }
    return 100.0 * (clean - perturbed) / clean;
}

} // namespace hyperscore
