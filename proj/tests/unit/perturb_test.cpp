#include <gtest/gtest.h>

#include <fstream>

#include "../support/oracles.hpp"
#include "hyperscore/perturb.hpp"
#include "temp_dir.hpp"

using namespace hyperscore;

namespace {

const Query kExample{"q1", "types of anti depression medication"};

std::vector<std::string> tokens(const std::string& s) { return detail::split_whitespace(s); }

std::vector<std::string> sorted_tokens(const std::string& s) {
    auto t = tokens(s);
    std::sort(t.begin(), t.end());
    return t;
}

void write_text(const std::filesystem::path& p, const std::string& s) { std::ofstream(p) << s; }

const char* kWords[] = {"types", "of", "anti", "depression", "medication", "a", "the", "query", "retrieval",
                        "neural", "to", "an", "graph", "search", "hello", "is", "latency", "xx", "Ottawa"};

Query random_query(std::mt19937_64& rng, std::size_t min_tokens, int index) {
    const std::size_t n = min_tokens + rng() % 10;
    std::vector<std::string> t;
    for (std::size_t i = 0; i < n; ++i) t.push_back(kWords[rng() % std::size(kWords)]);
    return {"q" + std::to_string(index), detail::join(t, " ")};
}

} // namespace

TEST(Misspell, WorkedExampleUnderPinnedSeed) {
    EXPECT_EQ(misspell(kExample, 51).query.text, "types of anti depressoin medication");
}

TEST(Misspell, ExactlyOneTokenChangedByOneEdit) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 500; ++i) {
        const auto q = random_query(rng, 1, i);
        const auto r = misspell(q, rng());
        const auto before = tokens(q.text);
        const auto after = tokens(r.query.text);
        EXPECT_EQ(r.query.query_id, q.query_id);
        const bool eligible = std::any_of(before.begin(), before.end(), [](auto& t) { return t.size() >= 4; });
        if (!eligible) {
            EXPECT_TRUE(r.unchanged);
            EXPECT_EQ(r.query, q);
            continue;
        }
        ASSERT_EQ(before.size(), after.size());
        std::size_t changed = 0;
        for (std::size_t t = 0; t < before.size(); ++t) {
            if (before[t] == after[t]) continue;
            ++changed;
            EXPECT_GE(before[t].size(), 4u);
            EXPECT_EQ(oracle::osa_distance(before[t], after[t]), 1u) << before[t] << " -> " << after[t];
        }
        EXPECT_EQ(changed, 1u) << q.text << " -> " << r.query.text;
    }
}

TEST(Misspell, SingleTokenAndIneligibleQueries) {
    const auto r = misspell({"q", "hello"}, 3);
    EXPECT_FALSE(r.unchanged);
    EXPECT_EQ(oracle::osa_distance("hello", r.query.text), 1u);
    const auto none = misspell({"q", "a an to"}, 3);
    EXPECT_TRUE(none.unchanged);
    EXPECT_EQ(none.query.text, "a an to");
    EXPECT_FALSE(none.warning.empty());
}

TEST(Misspell, RepeatedLettersStillChange) {
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto r = misspell({"q", "aaaa"}, s);
        EXPECT_NE(r.query.text, "aaaa");
        EXPECT_EQ(oracle::osa_distance("aaaa", r.query.text), 1u);
    }
}

TEST(Naturality, WorkedExampleUnderPinnedSeed) {
    EXPECT_EQ(naturality(kExample, 3).text, "types of depression medication");
}

TEST(Naturality, RemovalCounts) {
    EXPECT_EQ(naturality_removals(2), 1u);
    EXPECT_EQ(naturality_removals(5), 1u);
    EXPECT_EQ(naturality_removals(6), 2u);
    EXPECT_EQ(naturality_removals(10), 2u);
    EXPECT_EQ(naturality_removals(11), 3u);
}

TEST(Naturality, RemovesCeilingOfTwentyPercentKeepingOrder) {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 500; ++i) {
        const auto q = random_query(rng, 2, i);
        const auto before = tokens(q.text);
        const auto out = naturality(q, rng());
        const auto after = tokens(out.text);
        const std::size_t n = before.size();
        EXPECT_EQ(after.size(), n - std::max<std::size_t>(1, (n * 2 + 9) / 10));
        std::size_t j = 0;
        for (std::size_t t = 0; t < n && j < after.size(); ++t) j += before[t] == after[j];
        EXPECT_EQ(j, after.size()) << "survivors out of order";
        EXPECT_EQ(out.query_id, q.query_id);
    }
}

TEST(Naturality, SingleTokenIsAnError) {
    EXPECT_THROW(naturality({"q", "alone"}, 1), Error);
}

TEST(Reorder, WorkedExampleUnderPinnedSeed) {
    EXPECT_EQ(reorder(kExample, 164).text, "depression of anti types medication");
}

TEST(Reorder, PreservesMultisetAndChangesOrder) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 500; ++i) {
        const auto q = random_query(rng, 2, i);
        const auto out = reorder(q, rng());
        EXPECT_EQ(sorted_tokens(out.text), sorted_tokens(q.text));
        const auto t = tokens(q.text);
        const bool all_same = std::all_of(t.begin(), t.end(), [&](auto& x) { return x == t[0]; });
        if (!all_same) EXPECT_NE(out.text, q.text);
    }
    EXPECT_EQ(reorder({"q", "graph search"}, 9).text, "search graph");
    EXPECT_THROW(reorder({"q", "alone"}, 1), Error);
}

TEST(Synonymize, WorkedExampleUnderPinnedSeed) {
    const SynonymLexicon lexicon{{"types", {"kinds"}}};
    EXPECT_EQ(synonymize(kExample, lexicon, 0).query.text, "kinds of anti depression medication");
}

TEST(Synonymize, ReplacesExactlyOneTokenFromTheLexicon) {
    const SynonymLexicon lexicon{{"types", {"kinds", "sorts"}},
                                 {"query", {"question"}},
                                 {"graph", {"network", "lattice"}},
                                 {"search", {"lookup"}}};
    std::mt19937_64 rng(4);
    int eligible_seen = 0;
    for (int i = 0; i < 500; ++i) {
        const auto q = random_query(rng, 1, i);
        const auto r = synonymize(q, lexicon, rng());
        const auto before = tokens(q.text);
        const auto after = tokens(r.query.text);
        if (r.unchanged) {
            for (const auto& t : before) EXPECT_EQ(lexicon.count(t), 0u);
            continue;
        }
        ++eligible_seen;
        ASSERT_EQ(before.size(), after.size());
        std::size_t changed = 0;
        for (std::size_t t = 0; t < before.size(); ++t) {
            if (before[t] == after[t]) continue;
            ++changed;
            const auto& alts = lexicon.at(before[t]);
            EXPECT_NE(std::find(alts.begin(), alts.end(), after[t]), alts.end());
        }
        EXPECT_EQ(changed, 1u);
    }
    EXPECT_GT(eligible_seen, 100);
}

TEST(Synonymize, EmptyLexiconLeavesQueryAndWarns) {
    const auto r = synonymize(kExample, {}, 1);
    EXPECT_TRUE(r.unchanged);
    EXPECT_EQ(r.query, kExample);
}

TEST(Generators, AreDeterministic) {
    const SynonymLexicon lexicon{{"anti", {"counter"}}, {"types", {"kinds"}}};
    for (std::uint64_t s = 0; s < 20; ++s) {
        EXPECT_EQ(misspell(kExample, s).query, misspell(kExample, s).query);
        EXPECT_EQ(naturality(kExample, s), naturality(kExample, s));
        EXPECT_EQ(reorder(kExample, s), reorder(kExample, s));
        EXPECT_EQ(synonymize(kExample, lexicon, s).query, synonymize(kExample, lexicon, s).query);
    }
}

TEST(Lexicon, ReadsAndValidates) {
    TempDir dir;
    write_text(dir / "lex.tsv", "types\tkinds, sorts\nanti\tcounter\n");
    const auto lex = read_lexicon(dir / "lex.tsv");
    EXPECT_EQ(lex.at("types"), (std::vector<std::string>{"kinds", "sorts"}));
    write_text(dir / "self.tsv", "types\ttypes\n");
    EXPECT_THROW(read_lexicon(dir / "self.tsv"), Error);
    write_text(dir / "bad.tsv", "types kinds\n");
    EXPECT_THROW(read_lexicon(dir / "bad.tsv"), Error);
}

TEST(Paraphrases, LoadLastWinsWithWarning) {
    TempDir dir;
    write_text(dir / "p.tsv", "q1\tTypes of Antidepressants\nq2\tfirst\nq2\tsecond\n");
    const auto set = load_paraphrases(dir / "p.tsv");
    EXPECT_EQ(set.by_id.at("q1").text, "Types of Antidepressants");
    EXPECT_EQ(set.by_id.at("q2").text, "second");
    EXPECT_EQ(set.warnings.size(), 1u);
    write_text(dir / "empty.tsv", "");
    EXPECT_TRUE(load_paraphrases(dir / "empty.tsv").by_id.empty());
    write_text(dir / "bad.tsv", "q1 no tab\n");
    try {
        load_paraphrases(dir / "bad.tsv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find(":1:"), std::string::npos);
    }
}

TEST(Queries, ReadTsv) {
    TempDir dir;
    write_text(dir / "q.tsv", "q1\ttypes of anti depression medication\nq2\thello\n");
    const auto qs = read_queries(dir / "q.tsv");
    ASSERT_EQ(qs.size(), 2u);
    EXPECT_EQ(qs[0], kExample);
    write_text(dir / "blank.tsv", "q1\t   \n");
    EXPECT_THROW(read_queries(dir / "blank.tsv"), Error);
}

TEST(RelativeDrop, Arithmetic) {
    EXPECT_DOUBLE_EQ(relative_drop(0.5, 0.4), 20.0);
    EXPECT_DOUBLE_EQ(relative_drop(0.5, 0.5), 0.0);
    EXPECT_DOUBLE_EQ(relative_drop(0.5, 0.6), -20.0);
    EXPECT_THROW(relative_drop(0.0, 0.1), Error);
}

TEST(Keyboard, DataFileMatchesBuiltInMap) {
    EXPECT_EQ(read_keyboard_map(std::filesystem::path(HYPERSCORE_DATA_DIR) / "qwerty_neighbors.tsv"),
              qwerty_neighbors());
}

TEST(Keyboard, NeighbourRelationIsSymmetric) {
    for (const auto& [key, adj] : qwerty_neighbors()) {
        for (char c : adj) {
            EXPECT_NE(qwerty_neighbors().at(c).find(key), std::string::npos) << key << c;
        }
    }
}

TEST(PerturbationNames, ParseAliases) {
    EXPECT_EQ(parse_perturbation("misspelling"), Perturbation::Misspelling);
    EXPECT_EQ(parse_perturbation("reorder"), Perturbation::Ordering);
    EXPECT_EQ(parse_perturbation("synonymize"), Perturbation::Synonymizing);
    EXPECT_THROW(parse_perturbation("shout"), Error);
}
