#include "cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "cli/manifest.hpp"
#include "hyperscore/hyperscore.hpp"

namespace hyperscore::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kModes[] = {"exhaustive", "efficient-1", "efficient-2", "custom", "flat-ip"};

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) raise(ErrorKind::Io, "cannot open for writing: " + path.string());
    return out;
}

void require_exists(const fs::path& path, const std::string& flag) {
    if (!fs::exists(path)) raise(ErrorKind::Io, flag + ": no such file or directory: " + path.string());
}

std::string format_millis(std::chrono::duration<double> d) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(3);
    s << std::chrono::duration<double, std::milli>(d).count();
    return s.str();
}

fs::path with_suffix(const fs::path& base, const std::string& suffix) {
    return fs::path(base.string() + suffix);
}

/// Records every option of `sub` (explicit or defaulted) in the manifest.
void record_options(RunManifest& manifest, const CLI::App& sub) {
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
        if (name == "help") continue;
        if (opt->count() > 0) {
            const auto& r = opt->results();
            if (r.size() == 1) {
                manifest.option(name, r.front());
            } else {
                manifest.option(name, r);
            }
        } else if (!opt->get_default_str().empty()) {
            manifest.option(name, opt->get_default_str());
        }
    }
}

// ---------------------------------------------------------------------------
// build-graph
// ---------------------------------------------------------------------------

struct BuildGraphArgs {
    fs::path corpus;
    fs::path out;
    fs::path manifest;
    std::size_t degree = kDefaultGraphDegree;
    unsigned threads = detail::default_threads();
};

void cmd_build_graph(const BuildGraphArgs& a, RunManifest& manifest, std::ostream& out) {
    require_exists(a.corpus, "--corpus");
    manifest.input(a.corpus);
    const auto corpus = read_embeddings(a.corpus);
    const auto timed = build_graph_timed(corpus, a.degree, a.threads);
    save_graph(timed.graph, a.out);
    manifest.output(a.out);
    manifest.note("degree", timed.graph.degree);
    manifest.note("build_seconds", timed.build_seconds);
    out << "nodes\t" << timed.graph.count << '\n';
    out << "degree\t" << timed.graph.degree;
    if (timed.graph.degree != a.degree) out << "\t(requested " << a.degree << ", clamped to N-1)";
    out << '\n';
    out << "build_seconds\t" << detail::format_double(timed.build_seconds) << '\n';
}

// ---------------------------------------------------------------------------
// search
// ---------------------------------------------------------------------------

struct SearchArgs {
    fs::path corpus;
    std::string mode;
    fs::path hyperhead;
    fs::path queries;
    fs::path qnets;
    fs::path query_vectors;
    fs::path query_ids;
    fs::path graph;
    fs::path doc_ids;
    fs::path out;
    fs::path stats;
    fs::path manifest;
    std::size_t k = 100;
    std::uint64_t seed = 0;
    unsigned threads = detail::default_threads();
    std::size_t block_size = 4096;
    std::optional<std::size_t> initial_pool;
    std::optional<std::size_t> n_candidates;
    std::optional<std::size_t> max_iter;
};

/// Rejects flag combinations that do not fit the mode, naming every problem.
void check_search_inputs(const SearchArgs& a) {
    std::vector<std::string> problems;
    const bool flat = a.mode == "flat-ip";
    const bool graph_mode = a.mode == "efficient-1" || a.mode == "efficient-2" || a.mode == "custom";
    const bool custom = a.mode == "custom";
    if (graph_mode && a.graph.empty()) problems.push_back("--graph is required for mode " + a.mode);
    if (flat) {
        if (a.query_vectors.empty()) problems.push_back("--query-vectors is required for mode flat-ip");
        if (!a.hyperhead.empty() || !a.queries.empty() || !a.qnets.empty()) {
            problems.push_back("flat-ip scores pooled query vectors; drop --hyperhead/--queries/--qnets");
        }
    } else {
        if (!a.query_vectors.empty() || !a.query_ids.empty()) {
            problems.push_back("--query-vectors/--query-ids only apply to mode flat-ip");
        }
        const bool generated = !a.hyperhead.empty() || !a.queries.empty();
        if (generated && !a.qnets.empty()) {
            problems.push_back("give either --hyperhead with --queries, or --qnets, not both");
        } else if (a.qnets.empty()) {
            if (a.hyperhead.empty()) problems.push_back("--hyperhead is required (or --qnets)");
            if (a.queries.empty()) problems.push_back("--queries token directory is required (or --qnets)");
        }
    }
    const bool any_custom = a.initial_pool || a.n_candidates || a.max_iter;
    if (custom) {
        if (!a.initial_pool) problems.push_back("--initial-pool is required for mode custom");
        if (!a.n_candidates) problems.push_back("--n-candidates is required for mode custom");
        if (!a.max_iter) problems.push_back("--max-iter is required for mode custom");
    } else if (any_custom) {
        problems.push_back("--initial-pool/--n-candidates/--max-iter only apply to mode custom");
    }
    if (!problems.empty()) {
        std::string msg = "search " + a.mode + ":";
        for (const auto& p : problems) msg += "\n  " + p;
        raise(ErrorKind::Usage, msg);
    }
}

SearchConfig search_config_for(const SearchArgs& a, const std::string& query_id) {
    const std::uint64_t seed = derive_seed(a.seed, "search:" + query_id);
    if (a.mode == "efficient-1") return efficient_1(a.k, seed);
    if (a.mode == "efficient-2") return efficient_2(a.k, seed);
    return {*a.initial_pool, *a.n_candidates, *a.max_iter, a.k, seed};
}

std::vector<std::string> read_query_ids(const fs::path& path, std::size_t count) {
    std::vector<std::string> ids;
    if (path.empty()) {
        for (std::size_t i = 0; i < count; ++i) ids.push_back("q" + std::to_string(i));
        return ids;
    }
    detail::for_each_line(path, [&](std::string_view line, std::size_t) {
        const auto id = detail::trim(line);
        if (!id.empty()) ids.emplace_back(id);
    });
    if (ids.size() != count) {
        raise(ErrorKind::SizeMismatch, path.string() + ": " + std::to_string(ids.size()) +
                                           " query ids for " + std::to_string(count) + " query vectors");
    }
    return ids;
}

void cmd_search(const SearchArgs& a, RunManifest& manifest, std::ostream& out, std::ostream& err) {
    check_search_inputs(a);
    for (const auto& [flag, path] : {std::pair{"--corpus", a.corpus}, {"--hyperhead", a.hyperhead},
                                     {"--queries", a.queries}, {"--qnets", a.qnets},
                                     {"--query-vectors", a.query_vectors}, {"--query-ids", a.query_ids},
                                     {"--graph", a.graph}, {"--doc-ids", a.doc_ids}}) {
        if (path.empty()) continue;
        require_exists(path, flag);
        manifest.input(path);
    }
    manifest.seed("seed", a.seed);

    const auto corpus = read_embeddings(a.corpus);
    std::vector<std::string> doc_keys;
    if (!a.doc_ids.empty()) doc_keys = read_doc_keys(a.doc_ids, corpus.count());
    NeighborGraph graph;
    if (!a.graph.empty()) graph = load_graph(a.graph);

    // One entry per query; exactly one of the three sources is populated.
    std::vector<std::string> ids;
    std::vector<QueryTokens> tokens;
    std::vector<fs::path> qnet_files;
    std::optional<EmbeddingMatrix> vectors;
    std::optional<HyperheadParams> hyperhead;
    if (a.mode == "flat-ip") {
        vectors = read_embeddings(a.query_vectors);
        ids = read_query_ids(a.query_ids, vectors->count());
    } else if (!a.qnets.empty()) {
        for (const auto& e : fs::directory_iterator(a.qnets)) {
            if (e.is_regular_file() && e.path().extension() == ".hyqn") qnet_files.push_back(e.path());
        }
        std::sort(qnet_files.begin(), qnet_files.end());
        for (const auto& f : qnet_files) ids.push_back(f.stem().string());
    } else {
        hyperhead = load_hyperhead(a.hyperhead);
        tokens = load_query_tokens(a.queries);
        for (const auto& q : tokens) ids.push_back(q.query_id);
    }
    if (ids.empty()) err << "warning: no queries found\n";
    if (a.mode != "exhaustive" && a.mode != "flat-ip") {
        const auto c = search_config_for(a, "");
        manifest.note("search_config", {{"initial_pool", c.initial_pool},
                                        {"n_candidates", c.n_candidates},
                                        {"max_iter", c.max_iter},
                                        {"k", c.k}});
    }

    std::vector<SearchResult> results(ids.size());
    ScoringOptions scoring;
    scoring.block_size = a.block_size;
    scoring.threads = ids.size() < a.threads ? a.threads : 1;
    const unsigned query_threads = ids.size() < a.threads ? 1 : a.threads;
    detail::parallel_for(ids.size(), query_threads, 1, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            if (vectors) {
                results[i] = flat_ip_search(corpus, vectors->row(i), a.k);
                continue;
            }
            const auto start = std::chrono::steady_clock::now();
            const QNetParams qnet = hyperhead ? generate_qnet(tokens[i].tokens, *hyperhead)
                                              : load_qnet(qnet_files[i]);
            if (a.mode == "exhaustive") {
                results[i] = exhaustive_search(corpus, qnet, a.k, scoring);
            } else {
                results[i] = efficient_search(corpus, graph, qnet, search_config_for(a, ids[i]), scoring);
            }
            results[i].stats.wall_time = std::chrono::steady_clock::now() - start;
        }
    });

    RunFile run;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        results[i].ranking.query_id = ids[i];
        append_ranking(run, results[i].ranking, doc_keys.empty() ? nullptr : &doc_keys);
    }
    if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
    write_run(run, a.out, a.mode);
    manifest.output(a.out);

    const fs::path stats_path = a.stats.empty() ? with_suffix(a.out, ".stats.csv") : a.stats;
    auto stats = open_out(stats_path);
    stats << "query_id,scored_count,iterations,terminated_by,wall_ms\n";
    double scored = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& s = results[i].stats;
        scored += static_cast<double>(s.scored_count);
        stats << ids[i] << ',' << s.scored_count << ',' << s.iterations << ',' << to_string(s.terminated_by)
              << ',' << format_millis(s.wall_time) << '\n';
    }
    manifest.output(stats_path);
    out << "queries\t" << ids.size() << '\n';
    out << "mode\t" << a.mode << '\n';
    out << "scored_mean\t" << detail::format_double(ids.empty() ? 0.0 : scored / double(ids.size())) << '\n';
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    fs::path run;
    fs::path original_run;
    fs::path qrels;
    std::string metrics = "ndcg@10,mrr@10,recall@1000";
    int binarize_at = 1;
    fs::path out;
};

void report_exclusions(std::ostream& err, const std::string& metric, const MetricResult& r) {
    if (r.missing_qrels) err << metric << ": " << r.missing_qrels << " run queries have no qrels\n";
    if (r.no_relevant) err << metric << ": " << r.no_relevant << " queries have no relevant documents\n";
    if (r.missing_run) err << metric << ": " << r.missing_run << " queries missing from one run\n";
}

void cmd_eval(const EvalArgs& a, RunManifest& manifest, std::ostream& out, std::ostream& err) {
    std::vector<MetricSpec> specs;
    for (auto name : detail::split(a.metrics, ',')) {
        if (detail::trim(name).empty()) continue;
        specs.push_back(parse_metric(name));
    }
    if (specs.empty()) raise(ErrorKind::Usage, "--metrics lists no metric");
    const bool wants_pmrr = std::any_of(specs.begin(), specs.end(),
                                        [](const MetricSpec& s) { return s.kind == MetricKind::PMrr; });
    if (wants_pmrr && a.original_run.empty()) {
        raise(ErrorKind::Usage, "p-mrr compares two runs: give --original-run as well as --run");
    }
    if (!wants_pmrr && !a.original_run.empty()) {
        raise(ErrorKind::Usage, "--original-run is only used by p-mrr");
    }
    for (const auto& [flag, path] : {std::pair{"--run", a.run}, {"--qrels", a.qrels},
                                     {"--original-run", a.original_run}}) {
        if (path.empty()) continue;
        require_exists(path, flag);
        manifest.input(path);
    }
    const auto run = read_run(a.run);
    const auto qrels = read_qrels(a.qrels);
    std::optional<RunFile> original;
    if (!a.original_run.empty()) original = read_run(a.original_run);

    std::ostringstream rows;
    for (const auto& spec : specs) {
        MetricResult r;
        switch (spec.kind) {
        case MetricKind::Ndcg: r = ndcg_at_k(run, qrels, *spec.cutoff); break;
        case MetricKind::Mrr: r = mrr(run, qrels, spec.cutoff, a.binarize_at); break;
        case MetricKind::Recall: r = recall_at_k(run, qrels, *spec.cutoff, a.binarize_at); break;
        case MetricKind::PMrr: r = p_mrr(*original, run, qrels, a.binarize_at); break;
        }
        report_exclusions(err, spec.name, r);
        write_metric_rows(rows, spec.name, r);
    }
    if (a.out.empty()) {
        out << rows.str();
    } else {
        open_out(a.out) << rows.str();
        manifest.output(a.out);
    }
}

// ---------------------------------------------------------------------------
// perturb
// ---------------------------------------------------------------------------

struct PerturbArgs {
    fs::path queries;
    std::string type;
    std::uint64_t seed = 0;
    fs::path lexicon;
    fs::path paraphrases;
    fs::path keyboard;
    fs::path out;
};

void cmd_perturb(const PerturbArgs& a, RunManifest& manifest, std::ostream& out, std::ostream& err) {
    const Perturbation kind = parse_perturbation(a.type);
    if (kind == Perturbation::Synonymizing && a.lexicon.empty()) {
        raise(ErrorKind::Usage, "synonymizing needs --lexicon");
    }
    if (kind == Perturbation::Paraphrasing && a.paraphrases.empty()) {
        raise(ErrorKind::Usage, "paraphrasing needs --paraphrases (externally generated)");
    }
    for (const auto& [flag, path] : {std::pair{"--queries", a.queries}, {"--lexicon", a.lexicon},
                                     {"--paraphrases", a.paraphrases}, {"--keyboard", a.keyboard}}) {
        if (path.empty()) continue;
        require_exists(path, flag);
        manifest.input(path);
    }
    manifest.seed("seed", a.seed);
    const auto queries = read_queries(a.queries);
    SynonymLexicon lexicon;
    if (!a.lexicon.empty()) lexicon = read_lexicon(a.lexicon);
    ParaphraseSet paraphrases;
    if (!a.paraphrases.empty()) {
        paraphrases = load_paraphrases(a.paraphrases);
        for (const auto& w : paraphrases.warnings) err << "warning: " << w << '\n';
    }
    const KeyboardMap keys = a.keyboard.empty() ? qwerty_neighbors() : read_keyboard_map(a.keyboard);

    std::ostringstream rows;
    const std::string label(to_string(kind));
    std::size_t flagged = 0;
    for (const auto& q : queries) {
        Query result = q;
        switch (kind) {
        case Perturbation::Misspelling:
        case Perturbation::Synonymizing: {
            auto r = kind == Perturbation::Misspelling ? misspell(q, a.seed, keys) : synonymize(q, lexicon, a.seed);
            if (r.unchanged) {
                ++flagged;
                err << "warning: " << q.query_id << ": unchanged, " << r.warning << '\n';
            }
            result = std::move(r.query);
            break;
        }
        case Perturbation::Naturality: result = naturality(q, a.seed); break;
        case Perturbation::Ordering: result = reorder(q, a.seed); break;
        case Perturbation::Paraphrasing: {
            const auto it = paraphrases.by_id.find(q.query_id);
            if (it == paraphrases.by_id.end()) {
                ++flagged;
                err << "warning: " << q.query_id << ": no paraphrase, skipped\n";
                continue;
            }
            result = it->second;
            break;
        }
        }
        rows << result.query_id << '\t' << label << '\t' << result.text << '\n';
    }
    manifest.note("flagged", flagged);
    if (a.out.empty()) {
        out << rows.str();
    } else {
        open_out(a.out) << rows.str();
        manifest.output(a.out);
    }
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchArgs {
    fs::path config;
    fs::path out_dir = "bench-out";
    unsigned threads = detail::default_threads();
};

void cmd_bench(const BenchArgs& a, RunManifest& manifest, std::ostream& out, std::ostream& err) {
    require_exists(a.config, "--config");
    manifest.input(a.config);
    auto config = read_sweep_config(a.config);
    config.build_threads = a.threads;
    manifest.seed("seed", config.seed);
    const auto report = scaling_sweep(config, [&](const LatencyRecord& r) {
        err << r.label << " N=" << r.corpus_size << " mean_ms=" << detail::format_double(r.mean_ms) << '\n';
    });
    fs::create_directories(a.out_dir);
    {
        auto csv = open_out(a.out_dir / "latency.csv");
        write_latency_csv(csv, report.records);
        write_latency_csv(out, report.records);
    }
    manifest.output(a.out_dir / "latency.csv");
    if (!report.graph_build_seconds.empty()) {
        auto csv = open_out(a.out_dir / "graph_build.csv");
        csv << "corpus_size,build_s\n";
        for (const auto& [n, s] : report.graph_build_seconds) csv << n << ',' << detail::format_double(s) << '\n';
        manifest.output(a.out_dir / "graph_build.csv");
    }
    const auto fits = sweep_fits(report, config);
    if (fits.empty()) {
        err << "note: power-law fits need >= 3 corpus sizes\n";
    } else {
        auto tsv = open_out(a.out_dir / "fits.tsv");
        write_fit_tsv(tsv, fits);
        write_fit_tsv(out, fits);
        manifest.output(a.out_dir / "fits.tsv");
    }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    fs::path out_dir;
    std::size_t docs = 10'000;
    std::size_t dim = 32;
    std::size_t clusters = 64;
    std::size_t queries = 16;
    std::size_t query_tokens = 8;
    std::size_t attention_dim = 32;
    std::size_t learned_queries = 8;
    std::size_t qnet_layers = 3;
    std::uint64_t seed = 0;
};

void cmd_synth(const SynthArgs& a, RunManifest& manifest, std::ostream& out) {
    manifest.seed("seed", a.seed);
    fs::create_directories(a.out_dir);
    SyntheticCorpusSpec spec;
    spec.dim = a.dim;
    spec.clusters = a.clusters;
    spec.seed = derive_seed(a.seed, "corpus");
    write_embeddings(make_synthetic_corpus(a.docs, spec), a.out_dir / "corpus.hyem");

    const auto queries = make_synthetic_queries(a.queries, a.query_tokens, a.dim, derive_seed(a.seed, "queries"));
    write_query_tokens(a.out_dir / "queries", queries);
    Matrix pooled(queries.size(), a.dim);
    {
        auto ids = open_out(a.out_dir / "query_ids.txt");
        for (std::size_t i = 0; i < queries.size(); ++i) {
            const auto v = mean_pool(queries[i].tokens.matrix());
            std::copy(v.begin(), v.end(), pooled.row(i).begin());
            ids << queries[i].query_id << '\n';
        }
    }
    write_embeddings(EmbeddingMatrix(std::move(pooled)), a.out_dir / "query_vectors.hyem");

    HyperheadShape shape{a.dim, a.attention_dim, a.learned_queries, a.qnet_layers, a.dim};
    save_hyperhead(make_random_hyperhead(shape, derive_seed(a.seed, "hyperhead")), a.out_dir / "hyperhead.hyhh");

    for (const char* name : {"corpus.hyem", "queries", "query_ids.txt", "query_vectors.hyem", "hyperhead.hyhh"}) {
        manifest.output(a.out_dir / name);
        out << (a.out_dir / name).string() << '\n';
    }
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Retrieval with query-specific scoring networks"};
    app.name("hyperscore");
    app.require_subcommand(1);
    app.set_version_flag("--version", HYPERSCORE_VERSION);
    fs::path manifest_path;

    BuildGraphArgs bg;
    auto* build = app.add_subcommand("build-graph", "Build the exact k-nearest-neighbour document graph");
    build->add_option("--corpus", bg.corpus, "Document embeddings (HYEM)")->required();
    build->add_option("--out", bg.out, "Graph file to write (HYGR)")->required();
    build->add_option("--degree", bg.degree, "Neighbours per document")->capture_default_str()->check(CLI::PositiveNumber);
    build->add_option("--threads", bg.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    build->add_option("--manifest", manifest_path, "Run manifest path (default <out>.manifest.json)");

    SearchArgs sa;
    auto* search = app.add_subcommand("search", "Retrieve the top-k documents for each query");
    search->add_option("--corpus", sa.corpus, "Document embeddings (HYEM)")->required();
    search->add_option("--mode", sa.mode, "exhaustive | efficient-1 | efficient-2 | custom | flat-ip")
        ->required()
        ->check(CLI::IsMember(std::vector<std::string>(std::begin(kModes), std::end(kModes))));
    search->add_option("--hyperhead", sa.hyperhead, "Hyperhead parameters (HYHH)");
    search->add_option("--queries", sa.queries, "Query token directory (manifest.tsv + HYEM files)");
    search->add_option("--qnets", sa.qnets, "Directory of precomputed q-nets (<query_id>.hyqn)");
    search->add_option("--query-vectors", sa.query_vectors, "Pooled query vectors for flat-ip (HYEM)");
    search->add_option("--query-ids", sa.query_ids, "One query id per line, aligned with --query-vectors");
    search->add_option("--graph", sa.graph, "Neighbour graph (HYGR), required by graph modes");
    search->add_option("--doc-ids", sa.doc_ids, "internal_id<TAB>doc_key table for the run file");
    search->add_option("--k", sa.k, "Results per query")->capture_default_str()->check(CLI::PositiveNumber);
    search->add_option("--seed", sa.seed, "Base seed; per-query seeds are derived from it")->capture_default_str();
    search->add_option("--initial-pool", sa.initial_pool, "custom: initial random candidates");
    search->add_option("--n-candidates", sa.n_candidates, "custom: candidates expanded per iteration");
    search->add_option("--max-iter", sa.max_iter, "custom: iteration limit");
    search->add_option("--threads", sa.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    search->add_option("--block-size", sa.block_size, "Documents per scoring batch")->capture_default_str()->check(CLI::PositiveNumber);
    search->add_option("--out", sa.out, "TREC run file to write")->required();
    search->add_option("--stats", sa.stats, "Per-query stats CSV (default <out>.stats.csv)");
    search->add_option("--manifest", manifest_path, "Run manifest path (default <out>.manifest.json)");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Score a run against relevance judgements");
    eval->add_option("--run", ea.run, "TREC run file")->required();
    eval->add_option("--qrels", ea.qrels, "TREC qrels file")->required();
    eval->add_option("--metrics", ea.metrics, "Comma list: ndcg@k, mrr, mrr@k, recall@k, p-mrr")->capture_default_str();
    eval->add_option("--original-run", ea.original_run, "Run on the unmodified queries (p-mrr)");
    eval->add_option("--binarize-at", ea.binarize_at, "Minimum grade counted as relevant")->capture_default_str();
    eval->add_option("--out", ea.out, "Metrics TSV (default standard output)");
    eval->add_option("--manifest", manifest_path, "Run manifest path (default <out>.manifest.json)");

    PerturbArgs pa;
    auto* perturb = app.add_subcommand("perturb", "Generate perturbed queries");
    perturb->add_option("--queries", pa.queries, "query_id<TAB>text file")->required();
    perturb->add_option("--type", pa.type,
                        "misspelling | naturality | ordering | synonymizing | paraphrasing")->required();
    perturb->add_option("--seed", pa.seed, "Base seed")->capture_default_str();
    perturb->add_option("--lexicon", pa.lexicon, "token<TAB>alt1,alt2 synonym lexicon");
    perturb->add_option("--paraphrases", pa.paraphrases, "query_id<TAB>paraphrase file");
    perturb->add_option("--keyboard", pa.keyboard, "key<TAB>neighbours map (default built-in QWERTY)");
    perturb->add_option("--out", pa.out, "Output TSV (default standard output)");
    perturb->add_option("--manifest", manifest_path, "Run manifest path (default <out>.manifest.json)");

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "Latency scaling sweep on synthetic corpora");
    bench->add_option("--config", ba.config, "Sweep config (key = value lines)")->required();
    bench->add_option("--out-dir", ba.out_dir, "Directory for latency.csv, fits.tsv")->capture_default_str();
    bench->add_option("--threads", ba.threads, "Threads for graph construction (timing is serial)")
        ->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_option("--manifest", manifest_path, "Run manifest path (default <out-dir>/manifest.json)");

    SynthArgs ya;
    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus, queries and hyperhead");
    synth->add_option("--out-dir", ya.out_dir, "Output directory")->required();
    synth->add_option("--docs", ya.docs, "Corpus size")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--dim", ya.dim, "Embedding width")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--clusters", ya.clusters, "Mixture components")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--queries", ya.queries, "Number of queries")->capture_default_str();
    synth->add_option("--query-tokens", ya.query_tokens, "Tokens per query")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--attention-dim", ya.attention_dim, "Hyperhead attention width")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--learned-queries", ya.learned_queries, "Hyperhead learned queries")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--qnet-layers", ya.qnet_layers, "Layers in generated q-nets")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--seed", ya.seed, "Base seed")->capture_default_str();
    synth->add_option("--manifest", manifest_path, "Run manifest path (default <out-dir>/manifest.json)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    RunManifest manifest(sub->get_name(), args);
    record_options(manifest, *sub);
    try {
        fs::path default_manifest;
        if (sub == build) {
            cmd_build_graph(bg, manifest, out);
            default_manifest = with_suffix(bg.out, ".manifest.json");
        } else if (sub == search) {
            cmd_search(sa, manifest, out, err);
            default_manifest = with_suffix(sa.out, ".manifest.json");
        } else if (sub == eval) {
            cmd_eval(ea, manifest, out, err);
            if (!ea.out.empty()) default_manifest = with_suffix(ea.out, ".manifest.json");
        } else if (sub == perturb) {
            cmd_perturb(pa, manifest, out, err);
            if (!pa.out.empty()) default_manifest = with_suffix(pa.out, ".manifest.json");
        } else if (sub == bench) {
            cmd_bench(ba, manifest, out, err);
            default_manifest = ba.out_dir / "manifest.json";
        } else if (sub == synth) {
            cmd_synth(ya, manifest, out);
            default_manifest = ya.out_dir / "manifest.json";
        }
        const fs::path target = manifest_path.empty() ? default_manifest : manifest_path;
        if (!target.empty()) manifest.write(target);
    } catch (const Error& e) {
        err << "hyperscore " << sub->get_name() << ": " << e.what() << '\n';
        return e.kind() == ErrorKind::Usage ? kExitUsage : kExitFailure;
    } catch (const std::exception& e) {
        err << "hyperscore " << sub->get_name() << ": " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

} // namespace hyperscore::cli
