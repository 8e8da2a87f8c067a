#include "gluscope/cli.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "gluscope/activation_dump.hpp"
#include "gluscope/aggregator.hpp"
#include "gluscope/analysis.hpp"
#include "gluscope/corpus.hpp"
#include "gluscope/dataset.hpp"
#include "gluscope/errors.hpp"
#include "gluscope/fixtures.hpp"
#include "gluscope/io_util.hpp"
#include "gluscope/model.hpp"
#include "gluscope/page.hpp"
#include "gluscope/server.hpp"

namespace gluscope::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

// Arguments that parse but make no sense for the given inputs.
class UsageError : public Error {
public:
    using Error::Error;
};

struct RunManifest {
    std::string subcommand;
    json config = json::object();
    json inputs = json::object();
    json outputs = json::object();
    std::string model_id;
    std::string corpus_id;
    Clock::time_point start = Clock::now();

    std::string dump() const {
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        json j{{"tool", "gluscope"},   {"version", kVersion}, {"subcommand", subcommand},
               {"config", config},     {"inputs", inputs},    {"outputs", outputs},
               {"model_id", model_id}, {"corpus_id", corpus_id}, {"duration_seconds", secs}};
        return j.dump(2) + "\n";
    }

    void write(const fs::path& dir) const { write_file(dir / "run_manifest.json", dump()); }
};

std::string model_id_for(const fs::path& weights) { return weights.stem().string(); }

std::string corpus_id_for(const Corpus& c, const fs::path& dir) {
    if (!c.manifest.source.empty()) return c.manifest.source;
    return fs::absolute(dir).lexically_normal().filename().string();
}

// Runs `fn(shard)` for every shard on up to `workers` threads, rethrowing the
// first failure.
template <typename Fn>
void parallel_shards(std::size_t shards, std::size_t workers, Fn fn) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto work = [&] {
        for (std::size_t s; (s = next.fetch_add(1)) < shards;) {
            try {
                fn(s);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < std::min(workers, shards); ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

AggregatorState aggregate_model(const WeightSet& ws, const Corpus& corpus, std::size_t k, std::size_t shards) {
    const AggregatorConfig cfg{k, ws.config.n_layers, ws.config.d_mlp, ws.config.activation};
    std::vector<AggregatorState> states(shards, AggregatorState(cfg));
    const std::size_t n = corpus.docs.size();
    parallel_shards(shards, worker_count(shards), [&](std::size_t s) {
        const std::size_t begin = n * s / shards, end = n * (s + 1) / shards;
        for (std::size_t i = begin; i < end; ++i) states[s].observe_doc(collect_doc(ws, corpus.docs[i].doc));
    });
    AggregatorState total(cfg);
    for (const auto& st : states) total.merge(st);
    return total;
}

AggregatorState aggregate_dump(DumpReader& reader, const Corpus* corpus, std::size_t k, std::size_t shards) {
    const auto& h = reader.header();
    const AggregatorConfig cfg{k, h.n_layers, h.d_mlp, h.activation};
    std::vector<AggregatorState> states(shards, AggregatorState(cfg));
    const std::size_t batch_size = shards * 8;
    const std::size_t workers = worker_count(shards);
    std::vector<DumpDocBlock> batch;
    bool done = false;
    while (!done) {
        batch.clear();
        while (batch.size() < batch_size) {
            auto block = reader.next();
            if (!block) {
                done = true;
                break;
            }
            if (corpus) {
                const auto* d = corpus->find(block->doc_id);
                if (!d) throw StreamError("dump doc " + std::to_string(block->doc_id) + " is not in the corpus");
                if (d->doc.tokens.size() != block->n_positions) {
                    throw StreamError("dump doc " + std::to_string(block->doc_id) + " has " +
                                      std::to_string(block->n_positions) + " positions, corpus doc has " +
                                      std::to_string(d->doc.tokens.size()));
                }
            }
            batch.push_back(std::move(*block));
        }
        parallel_shards(shards, workers, [&](std::size_t s) {
            for (std::size_t i = s; i < batch.size(); i += shards) states[s].observe_doc(batch[i]);
        });
    }
    AggregatorState total(cfg);
    for (const auto& st : states) total.merge(st);
    return total;
}

int cmd_sample(const std::string& source, std::uint64_t budget, std::uint64_t max_doc, TokenId prefix,
               std::uint64_t seed, const fs::path& out_dir, std::ostream& out) {
    RunManifest rm;
    rm.subcommand = "sample";
    CorpusSpec spec{budget, max_doc, prefix, seed};
    spec.validate();
    std::ifstream in(source);
    if (!in) throw Error("cannot open source " + source);
    const ByteTokenizer tokenizer;
    const auto corpus = sample_corpus(jsonl_text_source(in), tokenizer, spec, fs::path(source).filename().string());
    save_corpus(corpus, out_dir);

    rm.config = {{"token_budget", budget}, {"max_doc_tokens", max_doc}, {"prefix_token", prefix}, {"seed", seed},
                 {"tokenizer", tokenizer.name()}};
    rm.inputs = {{"source", source}};
    rm.outputs = {{"corpus", out_dir.string()}};
    rm.corpus_id = corpus.manifest.source;
    rm.write(out_dir);
    out << "sampled " << corpus.manifest.n_docs << " docs, " << corpus.manifest.total_tokens << " tokens -> "
        << out_dir.string() << "\n";
    if (corpus.manifest.source_exhausted) out << "warning: source exhausted before the token budget was reached\n";
    return kOk;
}

int cmd_activations(const std::string& weights, const std::string& dump, const std::string& corpus_dir,
                    std::size_t k, std::size_t shards, const fs::path& out_dir, std::ostream& out) {
    if (weights.empty() == dump.empty()) throw UsageError("give exactly one of --weights or --dump");
    if (shards < 1) throw UsageError("--shards must be >= 1");
    if (k < 1) throw UsageError("--k must be >= 1");
    RunManifest rm;
    rm.subcommand = "activations";

    DatasetManifest dm;
    dm.k = k;
    std::optional<AggregatorState> state;
    std::optional<Corpus> corpus;
    if (!corpus_dir.empty()) {
        corpus = load_corpus(corpus_dir);
        dm.corpus_id = corpus_id_for(*corpus, corpus_dir);
    }
    if (!weights.empty()) {
        if (!corpus) throw UsageError("--weights requires --corpus");
        const auto ws = load_model(weights);
        dm.model_id = model_id_for(weights);
        state = aggregate_model(ws, *corpus, k, shards);
        rm.inputs = {{"weights", weights}, {"corpus", corpus_dir}};
    } else {
        std::ifstream in(dump, std::ios::binary);
        if (!in) throw Error("cannot open dump " + dump);
        DumpReader reader(in);
        dm.model_id = model_id_for(dump);
        state = aggregate_dump(reader, corpus ? &*corpus : nullptr, k, shards);
        rm.inputs = {{"dump", dump}, {"corpus", corpus_dir}};
    }
    const auto& cfg = state->config();
    dm.n_layers = cfg.n_layers;
    dm.d_mlp = cfg.d_mlp;
    dm.activation = cfg.activation;
    dm.total_tokens = state->total_observations();

    std::vector<DatasetRow> rows;
    for (const auto& r : state->finalize()) rows.push_back(to_row(r));
    dm.n_rows = rows.size();
    write_dataset(out_dir, rows, dm);

    rm.config = {{"k", k}, {"shards", shards}, {"workers", worker_count(shards)}};
    rm.outputs = {{"dataset", (out_dir / "dataset.jsonl").string()}, {"manifest", (out_dir / "manifest.json").string()}};
    rm.model_id = dm.model_id;
    rm.corpus_id = dm.corpus_id;
    rm.write(out_dir);
    out << "wrote " << rows.size() << " neuron rows over " << dm.total_tokens << " tokens -> " << out_dir.string()
        << "\n";
    return kOk;
}

int cmd_analyze(const std::string& dataset_dir, const std::string& weights, std::optional<std::size_t> layer,
                bool all_layers, std::ostream& out, std::ostream& err) {
    if (layer.has_value() == all_layers) throw UsageError("give exactly one of --layer or --all-layers");
    RunManifest rm;
    rm.subcommand = "analyze";
    const auto ds = read_dataset(dataset_dir);
    const auto ws = load_model(weights);
    if (ds.manifest.n_layers != ws.config.n_layers || ds.manifest.d_mlp != ws.config.d_mlp) {
        throw Error("dataset shape (" + std::to_string(ds.manifest.n_layers) + "x" + std::to_string(ds.manifest.d_mlp) +
                    ") does not match the model (" + std::to_string(ws.config.n_layers) + "x" +
                    std::to_string(ws.config.d_mlp) + ")");
    }
    std::vector<std::size_t> layers;
    if (layer) {
        if (*layer >= ws.config.n_layers) {
            throw UsageError("--layer " + std::to_string(*layer) + " out of range (model has " +
                             std::to_string(ws.config.n_layers) + " layers)");
        }
        layers.push_back(*layer);
    } else {
        for (std::size_t l = 0; l < ws.config.n_layers; ++l) layers.push_back(l);
    }

    std::vector<NeuronRecord> records;
    for (const auto& row : ds.rows) records.push_back(to_record(row, ds.manifest.total_tokens));

    char line[160];
    std::snprintf(line, sizeof line, "%-6s %-6s %-12s %-12s\n", "layer", "n", "r", "p");
    out << line;
    json results = json::array();
    for (auto l : layers) {
        const auto res = correlate_layer(records, ws, l);
        std::snprintf(line, sizeof line, "%-6zu %-6zu %-12.6f %-12.4e\n", l, res.n, res.r, res.p);
        out << line;
        results.push_back({{"layer", l}, {"n", res.n}, {"r", res.r}, {"p", res.p}});
    }
    rm.config = {{"layers", layers}};
    rm.inputs = {{"dataset", dataset_dir}, {"weights", weights}};
    rm.outputs = {{"results", results}};
    rm.model_id = ds.manifest.model_id;
    rm.corpus_id = ds.manifest.corpus_id;
    // No output directory: the run manifest goes to stderr as one line.
    err << json::parse(rm.dump()).dump() << "\n";
    return kOk;
}

int cmd_page(const std::string& dataset_dir, const std::string& corpus_dir, const std::string& weights,
             const std::vector<std::string>& neurons, std::size_t context_left, const fs::path& out_dir,
             std::ostream& out) {
    RunManifest rm;
    rm.subcommand = "page";
    std::vector<std::pair<std::size_t, std::size_t>> wanted;
    for (const auto& n : neurons) {
        try {
            wanted.push_back(parse_neuron_id(n));
        } catch (const InputError& e) {
            throw UsageError(e.what());
        }
    }
    const auto ds = read_dataset(dataset_dir);
    std::map<std::pair<std::size_t, std::size_t>, const DatasetRow*> by_id;
    for (const auto& r : ds.rows) by_id[{r.layer, r.neuron}] = &r;
    for (std::size_t i = 0; i < wanted.size(); ++i) {
        if (!by_id.count(wanted[i])) throw UsageError("unknown neuron " + neurons[i] + " (not in dataset)");
    }
    const auto corpus = load_corpus(corpus_dir);
    const auto ws = load_model(weights);

    json written = json::array();
    for (const auto& id : wanted) {
        const auto page = build_neuron_page(*by_id[id], corpus, ws, context_left, ds.manifest.model_id);
        write_page_bundle(out_dir, page);
        written.push_back(page_id(id.first, id.second));
        out << "wrote page " << page_id(id.first, id.second) << "\n";
    }
    rm.config = {{"context_left", context_left}, {"neurons", neurons}};
    rm.inputs = {{"dataset", dataset_dir}, {"corpus", corpus_dir}, {"weights", weights}};
    rm.outputs = {{"dir", out_dir.string()}, {"pages", written}};
    rm.model_id = ds.manifest.model_id;
    rm.corpus_id = ds.manifest.corpus_id;
    rm.write(out_dir);
    return kOk;
}

int cmd_serve(const std::string& dir, const std::string& host, int port, std::ostream& out) {
    httplib::Server server;
    configure_server(server, dir);
    out << "serving " << dir << " on http://" << host << ":" << port << "\n" << std::flush;
    if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
    return kOk;
}

int cmd_make_fixture(std::uint64_t seed, const fs::path& out_dir, std::ostream& out) {
    RunManifest rm;
    rm.subcommand = "make-fixture";
    const auto fx = make_again_fixture(seed);
    fs::create_directories(out_dir);
    auto ar = to_archive(fx.weights, DType::F64);
    ar.metadata()["gluscope.fixture_neuron"] = std::to_string(fx.neuron);
    ar.save(out_dir / "again.safetensors");
    save_corpus(fx.corpus, out_dir / "corpus");
    rm.config = {{"seed", seed}};
    rm.outputs = {{"weights", (out_dir / "again.safetensors").string()}, {"corpus", (out_dir / "corpus").string()}};
    rm.model_id = "again";
    rm.corpus_id = fx.corpus.manifest.source;
    rm.write(out_dir);
    out << "fixture neuron 0." << fx.neuron << " -> " << out_dir.string() << "\n";
    return kOk;
}

int cmd_dump(const std::string& weights, const std::string& corpus_dir, const fs::path& out_path, std::ostream& out) {
    const auto ws = load_model(weights);
    const auto corpus = load_corpus(corpus_dir);
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw Error("cannot open " + out_path.string() + " for writing");
    DumpHeader h;
    h.n_layers = static_cast<std::uint32_t>(ws.config.n_layers);
    h.d_mlp = static_cast<std::uint32_t>(ws.config.d_mlp);
    h.activation = ws.config.activation;
    DumpWriter writer(f, h);
    for (const auto& d : corpus.docs) writer.write(collect_doc(ws, d.doc));
    out << "wrote " << corpus.docs.size() << " docs (" << writer.bytes_written() << " bytes) -> " << out_path.string()
        << "\n";
    return kOk;
}

} // namespace

std::size_t worker_count(std::size_t requested) {
    std::size_t cap = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("GLUSCOPE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) cap = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(requested, cap));
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Per-neuron activation statistics for GLU-gated transformers"};
    app.name("gluscope");
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    auto* sample = app.add_subcommand("sample", "Build a token-budgeted corpus sample from a JSONL source");
    std::string source, out_dir;
    std::uint64_t budget = 20'000'000, max_doc = 1024, seed = 0;
    TokenId prefix = ByteTokenizer::kEndOfText;
    sample->add_option("--source", source, "JSONL file with one {\"text\": ...} per line")->required();
    sample->add_option("--budget", budget, "Target total tokens")->capture_default_str();
    sample->add_option("--max-doc-tokens", max_doc, "Per-document token cap, prefix included")->capture_default_str();
    sample->add_option("--prefix-token", prefix, "Token id prepended to every document")->capture_default_str();
    sample->add_option("--seed", seed, "Shuffle seed")->capture_default_str();
    sample->add_option("--out", out_dir, "Output corpus directory")->required();

    auto* acts = app.add_subcommand("activations", "Aggregate activations into a dataset");
    std::string weights, dump, corpus_dir;
    std::size_t k = 16, shards = 1;
    auto* w_opt = acts->add_option("--weights", weights, "Model weights archive");
    auto* d_opt = acts->add_option("--dump", dump, "Activation dump file");
    w_opt->excludes(d_opt);
    acts->add_option("--corpus", corpus_dir, "Corpus directory");
    acts->add_option("--k", k, "Examples kept per list")->capture_default_str();
    acts->add_option("--shards", shards, "Document shards aggregated in parallel")->capture_default_str();
    acts->add_option("--out", out_dir, "Output dataset directory")->required();

    auto* analyze = app.add_subcommand("analyze", "Correlate cos(w_in, w_out) with gate-positive frequency");
    std::string dataset_dir;
    std::optional<std::size_t> layer;
    bool all_layers = false;
    analyze->add_option("--dataset", dataset_dir, "Dataset directory")->required();
    analyze->add_option("--weights", weights, "Model weights archive")->required();
    auto* l_opt = analyze->add_option("--layer", layer, "Single layer");
    auto* a_opt = analyze->add_flag("--all-layers", all_layers, "Every layer");
    l_opt->excludes(a_opt);

    auto* page = app.add_subcommand("page", "Build neuron page bundles");
    std::vector<std::string> neurons;
    std::size_t context_left = kDefaultContextLeft;
    page->add_option("--dataset", dataset_dir, "Dataset directory")->required();
    page->add_option("--corpus", corpus_dir, "Corpus directory")->required();
    page->add_option("--weights", weights, "Model weights archive")->required();
    page->add_option("--neuron", neurons, "Neuron as layer.neuron (repeatable)")->required();
    page->add_option("--context-left", context_left, "Tokens shown before the token of interest")->capture_default_str();
    page->add_option("--out", out_dir, "Bundle directory")->required();

    auto* serve = app.add_subcommand("serve", "Serve page bundles and viewer assets over HTTP");
    std::string serve_dir, host = "127.0.0.1";
    int port = 8080;
    serve->add_option("--dir", serve_dir, "Bundle directory")->required();
    serve->add_option("--port", port, "TCP port")->capture_default_str();
    serve->add_option("--host", host, "Bind address")->capture_default_str();

    auto* fixture = app.add_subcommand("make-fixture", "Write the synthetic again-neuron model and corpus");
    std::uint64_t fixture_seed = 0;
    fixture->add_option("--seed", fixture_seed, "Fixture seed")->capture_default_str();
    fixture->add_option("--out", out_dir, "Output directory")->required();

    auto* dumpcmd = app.add_subcommand("dump", "Run a model over a corpus and write an activation dump");
    dumpcmd->add_option("--weights", weights, "Model weights archive")->required();
    dumpcmd->add_option("--corpus", corpus_dir, "Corpus directory")->required();
    dumpcmd->add_option("--out", out_dir, "Dump file")->required();

    std::vector<std::string> argv_store{"gluscope"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsageError;
    }

    try {
        if (sample->parsed()) return cmd_sample(source, budget, max_doc, prefix, seed, out_dir, out);
        if (acts->parsed()) return cmd_activations(weights, dump, corpus_dir, k, shards, out_dir, out);
        if (analyze->parsed()) return cmd_analyze(dataset_dir, weights, layer, all_layers, out, err);
        if (page->parsed()) return cmd_page(dataset_dir, corpus_dir, weights, neurons, context_left, out_dir, out);
        if (serve->parsed()) return cmd_serve(serve_dir, host, port, out);
        if (fixture->parsed()) return cmd_make_fixture(fixture_seed, out_dir, out);
        if (dumpcmd->parsed()) return cmd_dump(weights, corpus_dir, out_dir, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsageError;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kUsageError;
}

} // namespace gluscope::cli
