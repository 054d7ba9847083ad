#include "lakejoin/lakejoin.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace lakejoin::cli {
namespace {

bool g_quiet = false;
std::mutex g_log_mutex;

void log(std::string_view level, std::string_view event, json fields = json::object()) {
    if (g_quiet && level == "info") return;
    fields["level"] = level;
    fields["event"] = event;
    std::lock_guard<std::mutex> lock(g_log_mutex);
    std::cerr << fields.dump() << '\n';
}

template <typename T>
void overlay(T& target, const std::optional<T>& flag) {
    if (flag) target = *flag;
}

/// Runs f(0..n-1) on up to `workers` threads. Callers write results into
/// per-index slots, so output order never depends on scheduling.
template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw Error("cannot write " + path);
    return out;
}

std::vector<Column> read_queries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return read_columns_jsonl(in, IngestOptions{1}).columns;
}

/// Output sink: a file when a path is given, stdout otherwise.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty() && path != "-") file_ = open_out(path);
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::optional<std::ofstream> file_;
};

std::unique_ptr<CellEmbedder> make_cell_embedder(const std::string& spec) {
    auto h = parse_hash_spec(spec);
    return std::make_unique<HashCellEmbedder>(h.dim, h.seed);
}

struct Globals {
    std::string config_path;
    std::optional<std::size_t> workers;
    bool quiet = false;

    Config load() const {
        Config c = config_path.empty() ? Config{} : Config::load_file(config_path);
        overlay(c.workers, workers);
        return c;
    }
};

/// Flags shared by every subcommand that renders columns to text.
struct RenderFlags {
    std::optional<std::string> pattern;
    std::optional<std::string> strategy;
    std::optional<std::size_t> budget;

    void add(CLI::App* app) {
        app->add_option("--pattern", pattern, "Contextualization pattern");
        app->add_option("--strategy", strategy, "Cell sampling: frequency, random:<seed> or truncate");
        app->add_option("--budget", budget, "Token budget per column text");
    }

    void apply(Config& c) const {
        overlay(c.pattern, pattern);
        overlay(c.strategy, strategy);
        overlay(c.budget, budget);
    }
};

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
    std::vector<std::string> inputs;
    std::string format = "auto";
    std::string key = "maxdistinct";
    std::size_t min_cells = kDefaultMinCells;
    std::string out;
};

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p)) {
                auto ext = e.path().extension();
                if (e.is_regular_file() && (ext == ".csv" || ext == ".tsv" || ext == ".jsonl")) found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(p);
        }
    }
    return files;
}

int run_ingest(const IngestArgs& a) {
    const KeySelector key = parse_key_selector(a.key);
    std::vector<Column> cols;
    std::size_t warnings = 0;
    for (const auto& file : expand_inputs(a.inputs)) {
        std::string format = a.format;
        if (format == "auto") {
            auto ext = file.extension().string();
            format = ext.empty() ? "csv" : ext.substr(1);
        }
        std::ifstream in(file, std::ios::binary);
        if (!in) throw Error("cannot open " + file.string());
        IngestResult r;
        if (format == "jsonl") {
            r = read_columns_jsonl(in, IngestOptions{a.min_cells});
        } else if (format == "csv" || format == "tsv") {
            CsvOptions opt;
            opt.delimiter = format == "tsv" ? '\t' : ',';
            r = ingest_table(parse_delimited(in, file.stem().string(), opt), key, IngestOptions{a.min_cells});
        } else {
            throw InvalidArgument("unknown input format '" + format + "'");
        }
        for (const auto& w : r.warnings) log("warn", "ingest.skip", {{"reason", w}});
        warnings += r.warnings.size();
        for (auto& c : r.columns) cols.push_back(std::move(c));
    }
    Repository repo(std::move(cols));
    save_repository(repo, a.out);
    log("info", "ingest.done", {{"columns", repo.size()}, {"skipped", warnings}, {"out", a.out}});
    return 0;
}

// ---------------------------------------------------------------------------
// transform

struct TransformArgs {
    std::string repo;
    RenderFlags render;
    std::string out;
};

int run_transform(const TransformArgs& a, Config cfg) {
    a.render.apply(cfg);
    cfg.validate();
    Repository repo = load_repository(a.repo);
    const Pattern p = parse_pattern(cfg.pattern);
    const SampleStrategy s = parse_strategy(cfg.strategy, cfg.budget);
    std::vector<std::string> lines(repo.size());
    parallel_for(repo.size(), cfg.workers, [&](std::size_t i) {
        auto t = render(repo[i], p, s, repo);
        lines[i] = json{{"id", repo[i].id()}, {"text", t.text}, {"truncated", t.truncated}}.dump();
    });
    Sink sink(a.out);
    for (const auto& l : lines) sink.stream() << l << '\n';
    log("info", "transform.done", {{"columns", repo.size()}, {"pattern", cfg.pattern}, {"strategy", cfg.strategy}});
    return 0;
}

// ---------------------------------------------------------------------------
// index / search

struct IndexArgs {
    std::string repo;
    std::optional<std::string> embedder;
    RenderFlags render;
    std::optional<std::size_t> m;
    std::optional<std::size_t> ef_construction;
    std::string out;
};

/// Renders and embeds columns. Hash embedders are thread-safe and run on
/// the worker pool; an external embedder owns one connection and is used
/// serially in batches.
std::vector<EmbeddingVector> encode_columns(const std::vector<Column>& cols, ColumnEmbedder& embedder,
                                            bool external, const Pattern p, const SampleStrategy& s,
                                            const DocFreq& df, std::size_t workers) {
    RenderOptions ro;
    ro.count = embedder.token_counter();
    std::vector<EmbeddingVector> out(cols.size());
    if (!external) {
        parallel_for(cols.size(), workers, [&](std::size_t i) { out[i] = embedder.embed(render(cols[i], p, s, df, ro).text); });
        return out;
    }
    constexpr std::size_t kBatch = 64;
    for (std::size_t lo = 0; lo < cols.size(); lo += kBatch) {
        const std::size_t hi = std::min(cols.size(), lo + kBatch);
        std::vector<std::string> texts;
        for (std::size_t i = lo; i < hi; ++i) texts.push_back(render(cols[i], p, s, df, ro).text);
        auto vs = embedder.embed_batch(texts);
        for (std::size_t i = lo; i < hi; ++i) out[i] = std::move(vs[i - lo]);
    }
    return out;
}

int run_index(const IndexArgs& a, Config cfg) {
    a.render.apply(cfg);
    overlay(cfg.embedder, a.embedder);
    overlay(cfg.hnsw_m, a.m);
    overlay(cfg.hnsw_ef_construction, a.ef_construction);
    cfg.validate();
    Repository repo = load_repository(a.repo);
    auto embedder = make_column_embedder(cfg.embedder, cfg.budget);
    const bool external = cfg.embedder.starts_with("external:");

    auto t0 = std::chrono::steady_clock::now();
    auto vecs = encode_columns(repo.columns(), *embedder, external, parse_pattern(cfg.pattern),
                               parse_strategy(cfg.strategy, cfg.budget), repo.doc_freq(), cfg.workers);
    auto t1 = std::chrono::steady_clock::now();

    HnswParams hp;
    hp.m = cfg.hnsw_m;
    hp.ef_construction = cfg.hnsw_ef_construction;
    hp.ef_search = cfg.hnsw_ef_search;
    hp.seed = cfg.seed + 100;
    HnswIndex idx(embedder->dim(), hp);
    idx.reserve(repo.size());
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < repo.size(); ++i) {
        if (vecs[i].is_zero()) {
            log("warn", "index.zero_vector", {{"id", repo[i].id()}});
            ++skipped;
            continue;
        }
        idx.add(repo[i].id(), vecs[i]);
    }
    auto t2 = std::chrono::steady_clock::now();
    idx.metadata = json{{"embedder", cfg.embedder},
                        {"pattern", cfg.pattern},
                        {"strategy", cfg.strategy},
                        {"budget", cfg.budget}}
                       .dump();
    idx.save(a.out);
    auto ms = [](auto d) { return std::chrono::duration<double, std::milli>(d).count(); };
    log("info", "index.done",
        {{"vectors", idx.size()}, {"nodes", idx.node_count()}, {"skipped", skipped}, {"dim", embedder->dim()},
         {"encode_ms", ms(t1 - t0)}, {"build_ms", ms(t2 - t1)}, {"seed", hp.seed}, {"out", a.out}});
    return 0;
}

struct SearchArgs {
    std::string method = "ann";
    std::string index;
    std::string repo;
    std::string queries;
    std::size_t k = 10;
    std::optional<std::size_t> ef;
    std::optional<std::string> embedder;
    std::size_t sketch_m = kDefaultSketchSize;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void write_results(const std::string& path, const std::vector<Column>& queries, const std::vector<SearchResult>& results) {
    Sink sink(path);
    for (std::size_t i = 0; i < queries.size(); ++i) sink.stream() << result_to_json(queries[i].id(), results[i]).dump() << '\n';
}

int run_search(const SearchArgs& a, Config cfg) {
    overlay(cfg.hnsw_ef_search, a.ef);
    overlay(cfg.seed, a.seed);
    if (a.k == 0) throw InvalidArgument("k must be at least 1");
    auto queries = read_queries(a.queries);
    std::vector<SearchResult> results(queries.size());

    if (a.method == "minhash") {
        if (a.repo.empty()) throw InvalidArgument("search --method minhash needs --repo");
        Repository repo = load_repository(a.repo);
        SketchIndex sk(repo, a.sketch_m, cfg.seed);
        parallel_for(queries.size(), cfg.workers, [&](std::size_t i) { results[i] = sk.topk(queries[i], a.k); });
    } else if (a.method == "ann") {
        if (a.index.empty()) throw InvalidArgument("search --method ann needs --index");
        HnswIndex idx = HnswIndex::load(a.index);
        json meta = idx.metadata.empty() ? json::object() : json::parse(idx.metadata);
        cfg.embedder = meta.value("embedder", cfg.embedder);
        cfg.pattern = meta.value("pattern", cfg.pattern);
        cfg.strategy = meta.value("strategy", cfg.strategy);
        cfg.budget = meta.value("budget", cfg.budget);
        overlay(cfg.embedder, a.embedder);
        cfg.validate();
        auto embedder = make_column_embedder(cfg.embedder, cfg.budget);
        if (embedder->dim() != idx.dim()) throw DimensionMismatch("embedder dimension does not match the index");
        // Query cells have no repository statistics; they rank among themselves.
        DocFreq df;
        for (const auto& q : queries) {
            for (const auto& c : q.cells()) ++df[c];
        }
        auto vecs = encode_columns(queries, *embedder, cfg.embedder.starts_with("external:"),
                                   parse_pattern(cfg.pattern), parse_strategy(cfg.strategy, cfg.budget), df,
                                   cfg.workers);
        parallel_for(queries.size(), cfg.workers, [&](std::size_t i) {
            for (const auto& n : idx.knn(vecs[i], a.k, cfg.hnsw_ef_search)) {
                results[i].hits.push_back({n.id, 1.0 - n.distance * n.distance / 2.0});
            }
        });
    } else {
        throw InvalidArgument("unknown search method '" + a.method + "'");
    }
    write_results(a.out, queries, results);
    log("info", "search.done", {{"method", a.method}, {"queries", queries.size()}, {"k", a.k}});
    return 0;
}

// ---------------------------------------------------------------------------
// oracle

struct OracleArgs {
    std::string repo;
    std::string mode = "equi";
    double tau = 0.0;
    std::size_t k = 10;
    std::string queries;
    std::optional<std::string> cell_embedder;
    std::size_t pivots = 8;
    std::string out;
};

int run_oracle(const OracleArgs& a, Config cfg) {
    overlay(cfg.cell_embedder, a.cell_embedder);
    if (a.k == 0) throw InvalidArgument("k must be at least 1");
    Repository repo = load_repository(a.repo);
    auto queries = read_queries(a.queries);
    std::vector<SearchResult> results(queries.size());
    const JoinMode mode = parse_join_mode(a.mode);
    if (mode == JoinMode::Equi) {
        EquiIndex index(repo);
        parallel_for(queries.size(), cfg.workers, [&](std::size_t i) { results[i] = index.topk(queries[i], a.k); });
    } else {
        auto cells = make_cell_embedder(cfg.cell_embedder);
        MatchConfig mc{a.tau, cells.get()};
        SemanticIndexOptions so;
        so.pivots = a.pivots;
        so.seed = cfg.seed + 42;
        SemanticIndex index(repo, mc, so);
        parallel_for(queries.size(), cfg.workers,
                     [&](std::size_t i) { results[i] = index.topk(queries[i], a.k, a.pivots > 0); });
    }
    write_results(a.out, queries, results);
    log("info", "oracle.done", {{"mode", a.mode}, {"tau", a.tau}, {"queries", queries.size()}, {"k", a.k}});
    return 0;
}

// ---------------------------------------------------------------------------
// traingen

struct TraingenArgs {
    std::string repo;
    std::string mode = "equi";
    double t = 0.7;
    double r = 0.0;
    std::size_t n = 32;
    double tau = 0.0;
    std::optional<std::string> cell_embedder;
    std::size_t sample_size = 30000;
    std::optional<std::uint64_t> seed;
    RenderFlags render;
    std::string out;
    std::string manifest;
};

int run_traingen(const TraingenArgs& a, Config cfg) {
    a.render.apply(cfg);
    overlay(cfg.cell_embedder, a.cell_embedder);
    overlay(cfg.seed, a.seed);
    cfg.validate();
    Repository repo = load_repository(a.repo);

    TrainConfig tc;
    tc.threshold = a.t;
    tc.shuffle_rate = a.r;
    tc.batch_size = a.n;
    tc.join_mode = parse_join_mode(a.mode);
    tc.seed = cfg.seed;
    tc.sample_size = a.sample_size;
    tc.pattern = parse_pattern(cfg.pattern);
    tc.strategy = parse_strategy(cfg.strategy, cfg.budget);
    std::unique_ptr<CellEmbedder> cells;
    if (tc.join_mode == JoinMode::Semantic) {
        cells = make_cell_embedder(cfg.cell_embedder);
        tc.match = MatchConfig{a.tau, cells.get()};
    }
    tc.validate();

    auto positives = self_join_positives(repo, tc);
    auto pairs = augment_shuffle(positives, tc.shuffle_rate, tc.seed, repo, tc.pattern, tc.strategy);
    auto plan = make_batches(pairs, tc.batch_size, tc.seed);

    auto out = open_out(a.out);
    write_pairs_jsonl(out, pairs);
    const std::string manifest = a.manifest.empty() ? a.out + ".batches.json" : a.manifest;
    open_out(manifest) << batch_manifest(plan, tc.batch_size).dump() << '\n';
    log("info", "traingen.done",
        {{"positives", positives.size()}, {"pairs", pairs.size()}, {"augmented", pairs.size() - positives.size()},
         {"batches", plan.batches.size()}, {"dropped", plan.dropped}, {"seed", tc.seed}, {"manifest", manifest}});
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string exact;
    std::string model;
    std::vector<std::size_t> ks{10, 20, 30, 40, 50};
    std::string pool;
    std::string format = "text";
    std::string out;
};

MethodResults read_results_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return read_results_jsonl(in);
}

int run_eval(const EvalArgs& a) {
    for (auto k : a.ks) {
        if (k == 0) throw InvalidArgument("k must be at least 1");
    }
    auto exact = read_results_file(a.exact);
    auto model = read_results_file(a.model);
    auto rep = evaluate(exact, model, a.ks);
    if (!a.pool.empty()) {
        std::ifstream in(a.pool);
        if (!in) throw Error("cannot open " + a.pool);
        auto pool = LabelPool::read_jsonl(in);
        rep.pooled = pooled_prf({{"model", model}}, pool).at("model");
    }
    if (!a.out.empty()) open_out(a.out) << rep.to_json().dump(2) << '\n';
    if (a.format == "json") {
        std::cout << rep.to_json().dump() << '\n';
    } else {
        std::cout << rep.to_text();
    }
    log("info", "eval.done", {{"queries", rep.per_query.size()}});
    return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
    std::string spec;
    std::string method = "oracle";
    std::size_t k = 10;
    std::size_t repeats = 3;
    std::optional<std::string> embedder;
    RenderFlags render;
    std::string out;
};

int run_bench(const BenchArgs& a, Config cfg) {
    a.render.apply(cfg);
    overlay(cfg.embedder, a.embedder);
    cfg.validate();
    if (a.k == 0) throw InvalidArgument("k must be at least 1");
    std::ifstream in(a.spec);
    if (!in) throw Error("cannot open " + a.spec);
    const CorpusSpec spec = CorpusSpec::from_json(json::parse(in));
    const auto corpus = generate(spec);
    const auto& repo = corpus.repository;
    log("info", "bench.corpus", {{"columns", repo.size()}, {"queries", corpus.queries.size()}, {"seed", spec.seed}});

    using clock = std::chrono::steady_clock;
    auto ms = [](auto d) { return std::chrono::duration<double, std::milli>(d).count(); };
    EquiIndex exact(repo);
    std::vector<SearchResult> results(corpus.queries.size());
    LatencyStats st;
    double build_ms = 0.0;

    if (a.method == "oracle") {
        st = time_search(
            corpus.queries, [](const Column& q) { return &q; },
            [&](const Column* q) { return exact.topk(*q, a.k); }, a.repeats);
        for (std::size_t i = 0; i < results.size(); ++i) results[i] = exact.topk(corpus.queries[i], a.k);
    } else if (a.method == "minhash") {
        auto t0 = clock::now();
        SketchIndex sk(repo, kDefaultSketchSize, cfg.seed);
        build_ms = ms(clock::now() - t0);
        st = time_search(
            corpus.queries, [&](const Column& q) { return sk.hasher()(q); },
            [&](const MinHashSketch& s) { return sk.sketch_topk(s, a.k); }, a.repeats);
        for (std::size_t i = 0; i < results.size(); ++i) results[i] = sk.topk(corpus.queries[i], a.k);
    } else if (a.method == "ann") {
        auto embedder = make_column_embedder(cfg.embedder, cfg.budget);
        const bool external = cfg.embedder.starts_with("external:");
        const Pattern p = parse_pattern(cfg.pattern);
        const SampleStrategy s = parse_strategy(cfg.strategy, cfg.budget);
        HnswParams hp;
        hp.m = cfg.hnsw_m;
        hp.ef_construction = cfg.hnsw_ef_construction;
        hp.seed = cfg.seed + 100;
        auto t0 = clock::now();
        auto vecs = encode_columns(repo.columns(), *embedder, external, p, s, repo.doc_freq(), cfg.workers);
        HnswIndex idx(embedder->dim(), hp);
        idx.reserve(repo.size());
        for (std::size_t i = 0; i < repo.size(); ++i) {
            if (!vecs[i].is_zero()) idx.add(repo[i].id(), vecs[i]);
        }
        build_ms = ms(clock::now() - t0);
        RenderOptions ro;
        ro.count = embedder->token_counter();
        auto encode = [&](const Column& q) { return embedder->embed(render(q, p, s, repo.doc_freq(), ro).text); };
        auto search = [&](const EmbeddingVector& v) {
            SearchResult r;
            for (const auto& n : idx.knn(v, a.k, cfg.hnsw_ef_search)) r.hits.push_back({n.id, 1.0 - n.distance * n.distance / 2.0});
            return r;
        };
        st = time_search(corpus.queries, encode, search, a.repeats);
        for (std::size_t i = 0; i < results.size(); ++i) results[i] = search(encode(corpus.queries[i]));
    } else {
        throw InvalidArgument("unknown bench method '" + a.method + "'");
    }

    double precision = 0.0, ndcg = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        auto truth = exact.topk(corpus.queries[i], a.k);
        precision += precision_at_k(results[i], truth, a.k);
        ndcg += ndcg_at_k(results[i], truth, scores_of(truth), a.k);
    }
    if (!results.empty()) {
        precision /= static_cast<double>(results.size());
        ndcg /= static_cast<double>(results.size());
    }
    json report{{"spec", spec.to_json()},       {"method", a.method},     {"k", a.k},
                {"build_ms", build_ms},         {"latency", st.to_json()}, {"precision_at_k", precision},
                {"ndcg_at_k", ndcg}};
    if (a.method == "ann") report["embedder"] = cfg.embedder;
    Sink sink(a.out);
    sink.stream() << report.dump(2) << '\n';
    log("info", "bench.done", {{"method", a.method}, {"mean_ms", st.mean_ms}, {"precision_at_k", precision}});
    return 0;
}

// ---------------------------------------------------------------------------
// serve-hash

struct ServeArgs {
    std::size_t dim = 64;
    std::uint64_t seed = 0;
    std::size_t budget = 512;
    std::optional<std::uint16_t> port;
    bool once = false;
};

int run_serve(const ServeArgs& a) {
    HashColumnEmbedder embedder(a.dim, a.seed, a.budget);
    if (!a.port) {
        FdChannel stdio(STDIN_FILENO, STDOUT_FILENO);
        serve_embedder(stdio, embedder);
        return 0;
    }
    TcpListener listener(*a.port);
    log("info", "serve.listening", {{"port", listener.port()}});
    do {
        auto ch = listener.accept();
        serve_embedder(*ch, embedder);
    } while (!a.once);
    return 0;
}

// ---------------------------------------------------------------------------

int main_impl(int argc, char** argv) {
    CLI::App app{"Joinable column discovery over table repositories"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, "Key/value config file; flags override its values");
    app.add_option("--workers", g.workers, "Worker threads (default 1)")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", g.quiet, "Only log warnings and errors");

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Build a repository file from tables or column JSON lines");
    c_ingest->add_option("--input", ingest.inputs, "Input files or directories")->required();
    c_ingest->add_option("--format", ingest.format, "csv, tsv, jsonl or auto (by extension)")
        ->check(CLI::IsMember({"auto", "csv", "tsv", "jsonl"}));
    c_ingest->add_option("--key", ingest.key, "Key column: explicit:<n> or maxdistinct");
    c_ingest->add_option("--min-cells", ingest.min_cells, "Skip columns with fewer distinct cells");
    c_ingest->add_option("--out", ingest.out, "Repository file")->required();

    TransformArgs transform;
    auto* c_transform = app.add_subcommand("transform", "Render columns to text");
    c_transform->add_option("--repo", transform.repo)->required();
    transform.render.add(c_transform);
    c_transform->add_option("--out", transform.out, "Output JSON lines (default stdout)");

    IndexArgs index;
    auto* c_index = app.add_subcommand("index", "Embed columns and build an HNSW index");
    c_index->add_option("--repo", index.repo)->required();
    c_index->add_option("--embedder", index.embedder, "hash:<dim>:<seed> or external:<host:port|command>");
    index.render.add(c_index);
    c_index->add_option("--m", index.m, "HNSW degree bound");
    c_index->add_option("--ef-construction", index.ef_construction);
    c_index->add_option("--out", index.out, "Index file")->required();

    SearchArgs search;
    auto* c_search = app.add_subcommand("search", "Top-k search with an index or MinHash sketches");
    c_search->add_option("--method", search.method)->check(CLI::IsMember({"ann", "minhash"}));
    c_search->add_option("--index", search.index);
    c_search->add_option("--repo", search.repo);
    c_search->add_option("--queries", search.queries, "Query columns as JSON lines")->required();
    c_search->add_option("--k", search.k);
    c_search->add_option("--ef", search.ef, "HNSW search beam width");
    c_search->add_option("--embedder", search.embedder, "Override the embedder stored in the index");
    c_search->add_option("--m", search.sketch_m, "MinHash sketch size");
    c_search->add_option("--seed", search.seed);
    c_search->add_option("--out", search.out, "Output JSON lines (default stdout)");

    OracleArgs oracle;
    auto* c_oracle = app.add_subcommand("oracle", "Exact top-k joinability search");
    c_oracle->add_option("--repo", oracle.repo)->required();
    c_oracle->add_option("--mode", oracle.mode)->check(CLI::IsMember({"equi", "semantic"}));
    c_oracle->add_option("--tau", oracle.tau, "Cell match distance for semantic joins");
    c_oracle->add_option("--k", oracle.k);
    c_oracle->add_option("--queries", oracle.queries)->required();
    c_oracle->add_option("--cell-embedder", oracle.cell_embedder, "hash:<dim>:<seed>");
    c_oracle->add_option("--pivots", oracle.pivots, "Pivots for distance pruning, 0 to disable");
    c_oracle->add_option("--out", oracle.out, "Output JSON lines (default stdout)");

    TraingenArgs traingen;
    auto* c_traingen = app.add_subcommand("traingen", "Generate contrastive training pairs by self-join");
    c_traingen->add_option("--repo", traingen.repo)->required();
    c_traingen->add_option("--mode", traingen.mode)->check(CLI::IsMember({"equi", "semantic"}));
    c_traingen->add_option("--t", traingen.t, "Joinability threshold");
    c_traingen->add_option("--r", traingen.r, "Shuffle augmentation rate");
    c_traingen->add_option("--N", traingen.n, "Batch size");
    c_traingen->add_option("--tau", traingen.tau);
    c_traingen->add_option("--cell-embedder", traingen.cell_embedder);
    c_traingen->add_option("--sample-size", traingen.sample_size);
    c_traingen->add_option("--seed", traingen.seed);
    traingen.render.add(c_traingen);
    c_traingen->add_option("--out", traingen.out, "Pairs JSON lines")->required();
    c_traingen->add_option("--manifest", traingen.manifest, "Batch manifest (default <out>.batches.json)");

    EvalArgs eval;
    auto* c_eval = app.add_subcommand("eval", "Precision@k and NDCG@k against exact results");
    c_eval->add_option("--exact", eval.exact)->required();
    c_eval->add_option("--model", eval.model)->required();
    c_eval->add_option("--k", eval.ks)->delimiter(',');
    c_eval->add_option("--pool", eval.pool, "Label pool JSON lines");
    c_eval->add_option("--format", eval.format)->check(CLI::IsMember({"text", "json"}));
    c_eval->add_option("--out", eval.out, "Also write the JSON report here");

    BenchArgs bench;
    auto* c_bench = app.add_subcommand("bench", "Latency and quality on a synthetic corpus");
    c_bench->add_option("--spec", bench.spec, "Corpus spec JSON")->required();
    c_bench->add_option("--method", bench.method)->check(CLI::IsMember({"oracle", "minhash", "ann"}));
    c_bench->add_option("--k", bench.k);
    c_bench->add_option("--repeats", bench.repeats);
    c_bench->add_option("--embedder", bench.embedder);
    bench.render.add(c_bench);
    c_bench->add_option("--out", bench.out, "Report JSON (default stdout)");

    ServeArgs serve;
    auto* c_serve = app.add_subcommand("serve-hash", "Serve the hash embedder over the embedding protocol");
    c_serve->add_option("--dim", serve.dim);
    c_serve->add_option("--seed", serve.seed);
    c_serve->add_option("--budget", serve.budget);
    c_serve->add_option("--port", serve.port, "Listen on TCP instead of stdio");
    c_serve->add_flag("--once", serve.once, "Exit after the first connection closes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    g_quiet = g.quiet;

    Config cfg = g.load();
    if (c_ingest->parsed()) return run_ingest(ingest);
    if (c_transform->parsed()) return run_transform(transform, cfg);
    if (c_index->parsed()) return run_index(index, cfg);
    if (c_search->parsed()) return run_search(search, cfg);
    if (c_oracle->parsed()) return run_oracle(oracle, cfg);
    if (c_traingen->parsed()) return run_traingen(traingen, cfg);
    if (c_eval->parsed()) return run_eval(eval);
    if (c_bench->parsed()) return run_bench(bench, cfg);
    if (c_serve->parsed()) return run_serve(serve);
    return 2;
}

const char* kind_of(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
    if (dynamic_cast<const FormatError*>(&e)) return "FormatError";
    if (dynamic_cast<const DimensionMismatch*>(&e)) return "DimensionMismatch";
    if (dynamic_cast<const InvalidArgument*>(&e)) return "InvalidArgument";
    if (dynamic_cast<const TransportError*>(&e)) return "TransportError";
    if (dynamic_cast<const ProtocolError*>(&e)) return "ProtocolError";
    if (dynamic_cast<const RemoteError*>(&e)) return "RemoteError";
    if (dynamic_cast<const Error*>(&e)) return "Error";
    if (dynamic_cast<const json::exception*>(&e)) return "JsonError";
    return "Exception";
}

}  // namespace
}  // namespace lakejoin::cli

int main(int argc, char** argv) {
    try {
        return lakejoin::cli::main_impl(argc, argv);
    } catch (const std::exception& e) {
        lakejoin::cli::log("error", "failed", {{"type", lakejoin::cli::kind_of(e)}, {"message", e.what()}});
        return 1;
    }
}
