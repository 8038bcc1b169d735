// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance_suite [name-substring ...]
//
// With no arguments every criterion runs. Exit status is 0 only if every
// selected criterion passes.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "../unit/temp_dir.hpp"

using namespace hyperscore;

namespace {

struct Verdict {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    std::string name;
    double budget_seconds;
    std::function<Verdict()> run;
};

/// Every graph search in the suite reports here so the budget inequality is
/// checked on all of them.
struct BudgetLedger {
    std::size_t checked = 0;
    std::size_t violations = 0;
    std::string first_violation;

    void record(const SearchConfig& c, const SearchStats& s, std::size_t degree) {
        ++checked;
        const std::size_t bound = c.initial_pool + s.iterations * c.n_candidates * degree;
        if (s.scored_count > bound || s.iterations > c.max_iter) {
            if (violations++ == 0) {
                first_violation = "scored " + std::to_string(s.scored_count) + " > " + std::to_string(bound);
            }
        }
    }
};

BudgetLedger g_budget;

SearchResult checked_search(const EmbeddingMatrix& corpus, const NeighborGraph& graph, const QNetParams& q,
                            const SearchConfig& config) {
    auto r = efficient_search(corpus, graph, q, config);
    g_budget.record(config, r.stats, graph.degree);
    return r;
}

std::string fmt(double v, int precision = 3) {
    std::ostringstream s;
    s.precision(precision);
    s << v;
    return s.str();
}

// ---------------------------------------------------------------------------

Verdict full_pool_equivalence() {
    std::mt19937_64 rng(101);
    Verdict v;
    std::size_t exact = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 200 + rng() % 1801;
        const std::size_t h = 4 + rng() % 29;
        const auto corpus = gen::corpus(n, h, rng);
        const auto graph = build_graph(corpus, 1 + rng() % 24);
        const auto q = gen::qnet(3, h, rng);
        const std::size_t k = 1 + rng() % 100;
        // The pool covers the corpus; the beam must admit k results for the
        // first round to fill the result set.
        const SearchConfig config{n, k + rng() % 64, 1 + rng() % 20, k, rng()};
        const auto eff = checked_search(corpus, graph, q, config);
        const auto exh = exhaustive_search(corpus, q, k);
        bool same = eff.ranking.entries.size() == exh.ranking.entries.size();
        for (std::size_t i = 0; same && i < eff.ranking.entries.size(); ++i) {
            same = eff.ranking.entries[i].id == exh.ranking.entries[i].id;
            worst = std::max(worst, double(std::abs(eff.ranking.entries[i].score - exh.ranking.entries[i].score)));
        }
        exact += same;
    }
    v.pass = exact == 50 && worst <= 1e-6;
    v.detail = std::to_string(exact) + "/50 identical id lists, max score diff " + fmt(worst);
    return v;
}

Verdict linear_reduction() {
    std::mt19937_64 rng(202);
    std::size_t exact = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto corpus = gen::corpus(10'000, 64, rng);
        const auto query = gen::matrix(1, 64, rng);
        const std::size_t k = 1 + rng() % 1000;
        const auto flat = flat_ip_search(corpus, query.row(0), k);
        const auto lin = exhaustive_search(corpus, linear_qnet(query.row(0)), k);
        exact += flat.ranking.entries == lin.ranking.entries;
    }
    return {exact == 20, std::to_string(exact) + "/20 rankings identical rank-for-rank"};
}

Verdict graph_exactness() {
    std::mt19937_64 rng(303);
    std::size_t rows_ok = 0, rows_total = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng() % 999;
        Matrix m = gen::matrix(n, 1 + rng() % 32, rng);
        if (trial % 4 == 0) {
            for (float& x : m.values()) x = std::round(x * 2.0f);  // force distance ties
        }
        const EmbeddingMatrix corpus(m);
        const auto full = oracle::knn(m, n - 1);
        for (std::size_t degree : {1u, 5u, 100u}) {
            const auto g = build_graph(corpus, degree, 1 + trial % 3);
            for (std::size_t i = 0; i < n; ++i) {
                const auto row = g.row(i);
                const std::size_t d = std::min(degree, n - 1);
                rows_ok += row.size() == d && std::equal(row.begin(), row.end(), full[i].begin());
                ++rows_total;
            }
        }
    }
    return {rows_ok == rows_total, std::to_string(rows_ok) + "/" + std::to_string(rows_total) +
                                       " adjacency rows equal the all-pairs oracle"};
}

Verdict budget_bound() {
    std::mt19937_64 rng(404);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 50 + rng() % 3000;
        const std::size_t h = 2 + rng() % 16;
        const auto corpus = gen::corpus(n, h, rng);
        const auto graph = build_graph(corpus, 1 + rng() % 32);
        const auto q = gen::qnet(1 + rng() % 3, h, rng);
        const std::size_t pool = 1 + rng() % n;
        checked_search(corpus, graph, q, {pool, 1 + rng() % pool, 1 + rng() % 20, 1 + rng() % 100, rng()});
    }
    Verdict v;
    v.pass = g_budget.violations == 0 && g_budget.checked > 0;
    v.detail = std::to_string(g_budget.checked) + " graph searches checked, " +
               std::to_string(g_budget.violations) + " violations";
    if (g_budget.violations) v.detail += " (first: " + g_budget.first_violation + ")";
    return v;
}

Verdict latency_decoupling() {
    SweepConfig config;
    config.sizes = {20'000, 50'000, 100'000, 200'000};
    config.modes = {"exhaustive", "efficient-1"};
    config.seed = 505;
    const auto report = scaling_sweep(
        config,
        [](const LatencyRecord& r) {
            std::printf("  %-12s N=%-7zu mean_ms=%-9.3f p95_ms=%-9.3f scored_mean=%.0f\n", r.label.c_str(),
                        r.corpus_size, r.mean_ms, r.p95_ms, r.scored_mean);
            std::fflush(stdout);
        },
        [](const SearchConfig& c, const SearchStats& s, std::size_t degree) { g_budget.record(c, s, degree); });
    for (const auto& [n, s] : report.graph_build_seconds) {
        std::printf("  graph-build  N=%-7zu seconds=%.2f\n", n, s);
    }
    const auto exhaustive = fit_mode(report, "exhaustive");
    const auto efficient = fit_mode(report, "efficient-1");
    Verdict v;
    v.pass = exhaustive.exponent >= 0.8 && exhaustive.exponent <= 1.2 && efficient.exponent <= 0.3;
    v.detail = "exhaustive exponent " + fmt(exhaustive.exponent) + " (r2 " + fmt(exhaustive.r_squared) +
               "), efficient-1 exponent " + fmt(efficient.exponent) + " (r2 " + fmt(efficient.r_squared) + ")";
    return v;
}

Verdict hyperhead_properties() {
    std::mt19937_64 rng(606);
    std::size_t passthrough = 0, invariant = 0, valid = 0, generated = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        auto params = make_random_hyperhead(gen::hyperhead_shape(rng), rng());
        for (auto& L : params.layers) std::fill(L.out_proj.values().begin(), L.out_proj.values().end(), 0.0f);
        const auto qnet = generate_qnet(gen::matrix(1 + rng() % 8, params.encoder_dim, rng), params);
        ++generated;
        bool same = true;
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            const auto& base = params.layers[l].base;
            for (std::size_t r = 0; r < base.rows(); ++r) {
                for (std::size_t c = 0; c + 1 < base.cols(); ++c) same &= qnet.layers[l].weights(r, c) == base(r, c);
                same &= qnet.layers[l].bias[r] == base(r, base.cols() - 1);
            }
        }
        passthrough += same;
        try {
            validate_qnet(qnet);
            ++valid;
        } catch (const Error&) {
        }
    }
    for (int trial = 0; trial < 50; ++trial) {
        const auto params = make_random_hyperhead(gen::hyperhead_shape(rng), rng());
        const auto tokens = gen::matrix(2 + rng() % 12, params.encoder_dim, rng);
        std::vector<std::size_t> order(tokens.rows());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        Matrix shuffled(tokens.rows(), tokens.cols());
        for (std::size_t i = 0; i < order.size(); ++i) {
            std::copy(tokens.row(order[i]).begin(), tokens.row(order[i]).end(), shuffled.row(i).begin());
        }
        const auto a = generate_qnet(tokens, params);
        const auto b = generate_qnet(shuffled, params);
        generated += 2;
        double diff = 0.0;
        for (std::size_t l = 0; l < a.layers.size(); ++l) {
            for (std::size_t i = 0; i < a.layers[l].weights.size(); ++i) {
                diff = std::max(diff, double(std::abs(a.layers[l].weights.values()[i] - b.layers[l].weights.values()[i])));
            }
            for (std::size_t i = 0; i < a.layers[l].bias.size(); ++i) {
                diff = std::max(diff, double(std::abs(a.layers[l].bias[i] - b.layers[l].bias[i])));
            }
        }
        worst = std::max(worst, diff);
        invariant += diff <= 1e-6;
        for (const auto* q : {&a, &b}) {
            try {
                validate_qnet(*q);
                ++valid;
            } catch (const Error&) {
            }
        }
    }
    Verdict v;
    v.pass = passthrough == 20 && invariant == 50 && valid == generated;
    v.detail = "base passthrough " + std::to_string(passthrough) + "/20, permutation invariant " +
               std::to_string(invariant) + "/50 (max diff " + fmt(worst) + "), valid q-nets " +
               std::to_string(valid) + "/" + std::to_string(generated);
    return v;
}

Verdict metric_oracle() {
    std::mt19937_64 rng(707);
    std::size_t agree = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t pool = 1 + rng() % 200;
        oracle::Judgments judged;
        for (std::size_t d = 0; d < pool; ++d) {
            if (rng() % 3 == 0) judged["d" + std::to_string(d)] = int(rng() % 4);
        }
        judged["d" + std::to_string(rng() % pool)] = 1 + int(rng() % 3);
        oracle::Ranking ranking;
        for (std::size_t d = 0; d < pool; ++d) ranking.push_back("d" + std::to_string(d));
        std::shuffle(ranking.begin(), ranking.end(), rng);
        ranking.resize(1 + rng() % pool);
        RunFile run;
        double score = double(ranking.size());
        for (const auto& key : ranking) run["q"].push_back({key, score--});
        const Qrels qrels{{"q", std::map<std::string, int>(judged.begin(), judged.end())}};
        const std::size_t k = 1 + rng() % 100;
        const int threshold = 1;
        const double d1 = std::abs(ndcg_at_k(run, qrels, k).mean - oracle::ndcg(ranking, judged, k));
        const double d2 = std::abs(mrr(run, qrels, k, threshold).mean - oracle::reciprocal_rank(ranking, judged, k, threshold));
        const double d3 = std::abs(mrr(run, qrels, std::nullopt, threshold).mean -
                                   oracle::reciprocal_rank(ranking, judged, ranking.size(), threshold));
        const double d4 = std::abs(recall_at_k(run, qrels, k, threshold).mean - oracle::recall(ranking, judged, k, threshold));
        const double d = std::max({d1, d2, d3, d4});
        worst = std::max(worst, d);
        agree += d <= 1e-9;
    }
    auto ranked = [](std::size_t first_relevant) {
        RunFile run;
        for (std::size_t i = 1; i <= first_relevant; ++i) {
            run["q"].push_back({i == first_relevant ? "R" : "n" + std::to_string(i), 100.0 - double(i)});
        }
        return run;
    };
    const Qrels one{{"q", {{"R", 1}}}};
    const double same = p_mrr(ranked(3), ranked(3), one).mean;
    const double up = p_mrr(ranked(2), ranked(1), one).mean;
    const double down = p_mrr(ranked(1), ranked(2), one).mean;
    Verdict v;
    v.pass = agree == 200 && same == 0.0 && up == 100.0 && down == -100.0;
    v.detail = std::to_string(agree) + "/200 instances within 1e-9 (max diff " + fmt(worst) + "); p-mrr same " +
               fmt(same) + ", 2->1 " + fmt(up) + ", 1->2 " + fmt(down);
    return v;
}

Verdict perturbation_contracts() {
    static const char* words[] = {"types", "of", "anti", "depression", "medication", "a", "the", "query",
                                  "retrieval", "neural", "to", "an", "graph", "search", "hello", "is",
                                  "latency", "kinds", "medicine", "drug"};
    const SynonymLexicon lexicon{{"types", {"kinds", "sorts"}},
                                 {"medication", {"medicine", "drug"}},
                                 {"search", {"lookup"}},
                                 {"graph", {"network"}}};
    std::mt19937_64 rng(808);
    auto random_query = [&](int i) {
        const std::size_t n = 2 + rng() % 12;
        std::vector<std::string> t;
        t.push_back(words[rng() % 5]);  // always one token of length >= 4 or a lexicon key candidate
        for (std::size_t j = 1; j < n; ++j) t.push_back(words[rng() % std::size(words)]);
        std::shuffle(t.begin(), t.end(), rng);
        return Query{"q" + std::to_string(i), detail::join(t, " ")};
    };
    std::size_t ok[4] = {0, 0, 0, 0};
    std::size_t eligible_syn = 0;
    for (int i = 0; i < 500; ++i) {
        const auto q = random_query(i);
        const auto before = detail::split_whitespace(q.text);
        const std::uint64_t seed = rng();

        // misspelling: one token, one edit
        {
            const auto r = misspell(q, seed);
            const auto after = detail::split_whitespace(r.query.text);
            const bool has_long = std::any_of(before.begin(), before.end(), [](auto& t) { return t.size() >= 4; });
            std::size_t changed = 0;
            bool one_edit = after.size() == before.size();
            for (std::size_t t = 0; one_edit && t < before.size(); ++t) {
                if (before[t] != after[t]) {
                    ++changed;
                    one_edit = oracle::osa_distance(before[t], after[t]) == 1;
                }
            }
            ok[0] += has_long ? (!r.unchanged && one_edit && changed == 1 && r.query.query_id == q.query_id)
                              : (r.unchanged && r.query == q);
        }
        // naturality: ceil(0.2 n) removed, order kept
        {
            const auto out = naturality(q, seed);
            const auto after = detail::split_whitespace(out.text);
            const std::size_t n = before.size();
            const std::size_t removed = std::max<std::size_t>(1, (2 * n + 9) / 10);
            std::size_t j = 0;
            for (std::size_t t = 0; t < n && j < after.size(); ++t) j += before[t] == after[j];
            ok[1] += after.size() == n - removed && j == after.size() && out.query_id == q.query_id;
        }
        // ordering: same multiset, different order unless all tokens equal
        {
            const auto out = reorder(q, seed);
            auto a = before, b = detail::split_whitespace(out.text);
            const bool all_same = std::all_of(a.begin(), a.end(), [&](auto& t) { return t == a[0]; });
            const bool moved = all_same || out.text != q.text;
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            ok[2] += a == b && moved && out.query_id == q.query_id;
        }
        // synonymizing: one token replaced by a lexicon value
        {
            const auto r = synonymize(q, lexicon, seed);
            const auto after = detail::split_whitespace(r.query.text);
            const bool has_key = std::any_of(before.begin(), before.end(), [&](auto& t) { return lexicon.count(t) > 0; });
            eligible_syn += has_key;
            std::size_t changed = 0;
            bool member = after.size() == before.size();
            for (std::size_t t = 0; member && t < before.size(); ++t) {
                if (before[t] == after[t]) continue;
                ++changed;
                const auto it = lexicon.find(before[t]);
                member = it != lexicon.end() &&
                         std::find(it->second.begin(), it->second.end(), after[t]) != it->second.end();
            }
            ok[3] += has_key ? (!r.unchanged && member && changed == 1) : (r.unchanged && r.query == q);
        }
    }
    const Query example{"q1", "types of anti depression medication"};
    const SynonymLexicon types{{"types", {"kinds"}}};
    const bool row = misspell(example, 51).query.text == "types of anti depressoin medication" &&
                     naturality(example, 3).text == "types of depression medication" &&
                     reorder(example, 164).text == "depression of anti types medication" &&
                     synonymize(example, types, 0).query.text == "kinds of anti depression medication";
    Verdict v;
    v.pass = ok[0] == 500 && ok[1] == 500 && ok[2] == 500 && ok[3] == 500 && eligible_syn > 0 && row;
    v.detail = "misspelling " + std::to_string(ok[0]) + "/500, naturality " + std::to_string(ok[1]) +
               "/500, ordering " + std::to_string(ok[2]) + "/500, synonymizing " + std::to_string(ok[3]) +
               "/500; worked example row " + (row ? "reproduced" : "NOT reproduced");
    return v;
}

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict format_round_trips() {
    TempDir dir;
    std::mt19937_64 rng(909);
    std::size_t ok = 0, total = 0;
    auto check = [&](bool equal, const std::filesystem::path& a, const std::filesystem::path& b) {
        ++total;
        ok += equal && file_bytes(a) == file_bytes(b);
    };
    for (int trial = 0; trial < 20; ++trial) {
        Matrix m = gen::matrix(1 + rng() % 300, 1 + rng() % 64, rng, 10.0f);
        const EmbeddingMatrix f32(m);
        const EmbeddingMatrix bf16(m, DType::BF16);
        write_embeddings(f32, dir / "a.hyem");
        const auto f32_back = read_embeddings(dir / "a.hyem");
        write_embeddings(f32_back, dir / "b.hyem");
        check(f32_back.matrix() == f32.matrix() && f32_back.dtype() == DType::F32, dir / "a.hyem", dir / "b.hyem");
        write_embeddings(bf16, dir / "c.hyem");
        const auto bf16_back = read_embeddings(dir / "c.hyem");
        write_embeddings(bf16_back, dir / "d.hyem");
        check(bf16_back.matrix() == bf16.matrix() && bf16_back.dtype() == DType::BF16, dir / "c.hyem", dir / "d.hyem");

        const auto graph = build_graph(f32.count() >= 2 ? f32 : EmbeddingMatrix(gen::matrix(5, 3, rng)), 1 + rng() % 40);
        save_graph(graph, dir / "a.hygr");
        const auto graph_back = load_graph(dir / "a.hygr");
        save_graph(graph_back, dir / "b.hygr");
        check(graph_back.count == graph.count && graph_back.degree == graph.degree &&
                  graph_back.adjacency == graph.adjacency,
              dir / "a.hygr", dir / "b.hygr");

        const auto q = gen::qnet(1 + rng() % 6, 1 + rng() % 48, rng);
        save_qnet(q, dir / "a.hyqn");
        const auto q_back = load_qnet(dir / "a.hyqn");
        save_qnet(q_back, dir / "b.hyqn");
        check(q_back == q, dir / "a.hyqn", dir / "b.hyqn");

        const auto hh = make_random_hyperhead(gen::hyperhead_shape(rng), rng());
        save_hyperhead(hh, dir / "a.hyhh");
        const auto hh_back = load_hyperhead(dir / "a.hyhh");
        save_hyperhead(hh_back, dir / "b.hyhh");
        check(hh_back == hh, dir / "a.hyhh", dir / "b.hyhh");
    }
    return {ok == total, std::to_string(ok) + "/" + std::to_string(total) +
                             " HYEM(F32, BF16)/HYGR/HYQN/HYHH save->load->save round trips bitwise equal"};
}

} // namespace

int main(int argc, char** argv) {
    // Budget bound runs last so it also covers the searches made by the
    // equivalence and latency criteria.
    const std::vector<Criterion> criteria = {
        {"full-pool-equivalence", 60, full_pool_equivalence},
        {"linear-reduction", 30, linear_reduction},
        {"graph-exactness", 60, graph_exactness},
        {"latency-decoupling", 900, latency_decoupling},
        {"hyperhead-properties", 30, hyperhead_properties},
        {"metric-oracle", 10, metric_oracle},
        {"perturbation-contracts", 10, perturbation_contracts},
        {"format-round-trips", 10, format_round_trips},
        {"budget-bound", 600, budget_bound},
    };
    std::vector<std::string> filters(argv + 1, argv + argc);
    int failures = 0, ran = 0;
    for (const auto& c : criteria) {
        if (!filters.empty() &&
            std::none_of(filters.begin(), filters.end(), [&](const std::string& f) { return c.name.find(f) != std::string::npos; })) {
            continue;
        }
        ++ran;
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (seconds > c.budget_seconds) {
            v.pass = false;
            v.detail += "; over the " + fmt(c.budget_seconds) + " s budget";
        }
        failures += !v.pass;
        std::printf("%s %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", c.name.c_str(), v.detail.c_str(), seconds);
        std::fflush(stdout);
    }
    if (ran == 0) {
        std::fprintf(stderr, "no criterion matches the given filter\n");
        return 2;
    }
    return failures == 0 ? 0 : 1;
}
