#include "schemasift/cli.h"

#include <atomic>
#include <cstdlib>
#include <functional>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "schemasift/binary_io.h"
#include "schemasift/fd_graph.h"
#include "schemasift/remote_provider.h"
#include "schemasift/sql_columns.h"
#include "schemasift/synthetic.h"
#include "schemasift/text.h"
#include "schemasift/value_index.h"

namespace schemasift {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------------------------
// Configuration

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

template <class T>
void read_field(const json& obj, const char* key, T& into, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        into = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::InvalidArgument, "config field " + where + "." + key + " has the wrong type");
    }
}

}  // namespace

void EngineConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, "config: " + what); };
    if (provider.kind != "hash" && provider.kind != "remote") fail("provider.kind must be hash or remote");
    if (provider.dim == 0 || provider.dim > (1u << 16)) fail("provider.dim must lie in [1, 65536]");
    if (provider.kind == "remote" && provider.endpoint.empty()) fail("provider.endpoint is required for remote");
    if (provider.max_batch == 0) fail("provider.max_batch must be positive");
    if (provider.max_in_flight == 0) fail("provider.max_in_flight must be positive");
    if (provider.timeout_ms <= 0) fail("provider.timeout_ms must be positive");
    if (reranker.layers > 16) fail("reranker.layers must lie in [0, 16]");
    if (reranker.hidden_dim == 0 || reranker.hidden_dim > 8192) fail("reranker.hidden_dim must lie in [1, 8192]");
    if (reranker.key_dim > 8192) fail("reranker.key_dim must lie in [0, 8192]");
    if (!(reranker.margin > 0)) fail("reranker.margin must be positive");
    if (!(reranker.learning_rate > 0)) fail("reranker.learning_rate must be positive");
    if (reranker.batch_size == 0) fail("reranker.batch_size must be positive");
    if (reranker.negatives_per_positive == 0) fail("reranker.negatives_per_positive must be positive");
    if (key_predictor != "heuristic" && key_predictor != "remote" && key_predictor != "none") {
        fail("key_predictor must be heuristic, remote or none");
    }
    if (!(recall_floor >= 0 && recall_floor <= 1)) fail("recall_floor must lie in [0, 1]");
    if (jobs == 0 || jobs > 1024) fail("jobs must lie in [1, 1024]");
    if (context.max_prompt_tokens == 0) fail("context.max_prompt_tokens must be positive");
    selection.validate();
}

EngineConfig config_from_json(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
    EngineConfig c;
    if (doc.contains("schemas")) {
        for (auto& s : doc.at("schemas")) {
            SchemaSource src;
            if (s.is_string()) {
                src.path = resolve(base_dir, s.get<std::string>());
            } else {
                src.path = resolve(base_dir, s.at("path").get<std::string>());
                if (s.contains("format")) src.format = parse_schema_format(s.at("format").get<std::string>());
            }
            c.schemas.push_back(src);
        }
    }
    for (auto* key : {"value_dumps", "key_predictions"}) {
        if (!doc.contains(key)) continue;
        auto& target = std::string(key) == "value_dumps" ? c.value_dumps : c.key_predictions;
        for (auto& [db, p] : doc.at(key).items()) target[db] = resolve(base_dir, p.get<std::string>());
    }
    if (doc.contains("artifacts_dir")) c.artifacts_dir = resolve(base_dir, doc.at("artifacts_dir").get<std::string>());
    else c.artifacts_dir = resolve(base_dir, "artifacts");
    read_field(doc, "key_predictor", c.key_predictor, "$");
    read_field(doc, "seed", c.seed, "$");
    read_field(doc, "steiner", c.steiner, "$");
    read_field(doc, "recall_floor", c.recall_floor, "$");
    read_field(doc, "jobs", c.jobs, "$");
    if (doc.contains("provider")) {
        auto& p = doc.at("provider");
        read_field(p, "kind", c.provider.kind, "provider");
        read_field(p, "dim", c.provider.dim, "provider");
        read_field(p, "endpoint", c.provider.endpoint, "provider");
        read_field(p, "model_hint", c.provider.model_hint, "provider");
        read_field(p, "max_batch", c.provider.max_batch, "provider");
        read_field(p, "max_in_flight", c.provider.max_in_flight, "provider");
        read_field(p, "timeout_ms", c.provider.timeout_ms, "provider");
        read_field(p, "retries", c.provider.retries, "provider");
        std::string cache;
        read_field(p, "cache_dir", cache, "provider");
        if (!cache.empty()) c.provider.cache_dir = resolve(base_dir, cache).string();
    }
    if (doc.contains("reranker")) {
        auto& r = doc.at("reranker");
        read_field(r, "layers", c.reranker.layers, "reranker");
        read_field(r, "hidden_dim", c.reranker.hidden_dim, "reranker");
        read_field(r, "key_dim", c.reranker.key_dim, "reranker");
        read_field(r, "margin", c.reranker.margin, "reranker");
        read_field(r, "learning_rate", c.reranker.learning_rate, "reranker");
        read_field(r, "epochs", c.reranker.epochs, "reranker");
        read_field(r, "batch_size", c.reranker.batch_size, "reranker");
        read_field(r, "negatives_per_positive", c.reranker.negatives_per_positive, "reranker");
    }
    if (doc.contains("context")) {
        read_field(doc.at("context"), "sample_k", c.context.sample_k, "context");
        read_field(doc.at("context"), "max_prompt_tokens", c.context.max_prompt_tokens, "context");
    }
    if (doc.contains("selection")) {
        auto& s = doc.at("selection");
        std::string mode = to_string(c.selection.mode);
        read_field(s, "mode", mode, "selection");
        c.selection.mode = parse_selection_mode(mode);
        read_field(s, "value", c.selection.value, "selection");
    }
    c.validate();
    return c;
}

json config_to_json(const EngineConfig& c) {
    json j;
    auto& schemas = j["schemas"] = json::array();
    for (auto& s : c.schemas) {
        schemas.push_back({{"path", s.path.string()}, {"format", s.format == SchemaFormat::native ? "native" : "spider"}});
    }
    j["value_dumps"] = json::object();
    for (auto& [db, p] : c.value_dumps) j["value_dumps"][db] = p.string();
    j["key_predictions"] = json::object();
    for (auto& [db, p] : c.key_predictions) j["key_predictions"][db] = p.string();
    j["artifacts_dir"] = c.artifacts_dir.string();
    j["key_predictor"] = c.key_predictor;
    j["provider"] = {{"kind", c.provider.kind},           {"dim", c.provider.dim},
                     {"endpoint", c.provider.endpoint},   {"model_hint", c.provider.model_hint},
                     {"max_batch", c.provider.max_batch}, {"max_in_flight", c.provider.max_in_flight},
                     {"timeout_ms", c.provider.timeout_ms}, {"retries", c.provider.retries},
                     {"cache_dir", c.provider.cache_dir}};
    j["reranker"] = {{"layers", c.reranker.layers},
                     {"hidden_dim", c.reranker.hidden_dim},
                     {"key_dim", c.reranker.key_dim},
                     {"margin", c.reranker.margin},
                     {"learning_rate", c.reranker.learning_rate},
                     {"epochs", c.reranker.epochs},
                     {"batch_size", c.reranker.batch_size},
                     {"negatives_per_positive", c.reranker.negatives_per_positive}};
    j["context"] = {{"sample_k", c.context.sample_k}, {"max_prompt_tokens", c.context.max_prompt_tokens}};
    j["seed"] = c.seed;
    j["selection"] = {{"mode", to_string(c.selection.mode)}, {"value", c.selection.value}};
    j["steiner"] = c.steiner;
    j["recall_floor"] = c.recall_floor;
    j["jobs"] = c.jobs;
    return j;
}

EngineConfig load_config(const fs::path& path) {
    std::string text;
    try {
        text = read_file_bytes(path);
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidArgument, "cannot read config " + path.string());
    }
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidArgument, "config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(doc, path.parent_path());
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return kExitUsage;
        case ErrorCode::ProviderUnavailable:
        case ErrorCode::OverCapacity:
        case ErrorCode::MalformedResponse: return kExitProvider;
        default: return kExitData;
    }
}

std::shared_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config) {
    std::shared_ptr<EmbeddingProvider> p;
    if (config.kind == "hash") {
        p = std::make_shared<HashEmbedder>(config.dim);
    } else if (config.kind == "remote") {
        RemoteConfig rc;
        rc.endpoint = config.endpoint;
        rc.model_hint = config.model_hint;
        rc.dim = config.dim;
        rc.max_batch = config.max_batch;
        rc.max_in_flight = config.max_in_flight;
        rc.timeout_ms = config.timeout_ms;
        rc.retries = config.retries;
        if (const char* token = std::getenv("SCHEMASIFT_AUTH_TOKEN")) rc.auth_token = token;
        p = std::make_shared<RemoteProvider>(rc);
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown provider kind '" + config.kind + "'");
    }
    if (!config.cache_dir.empty()) p = std::make_shared<CachingProvider>(p, config.cache_dir);
    return p;
}

std::map<std::string, DatabaseSchema> load_configured_schemas(const EngineConfig& config) {
    std::map<std::string, DatabaseSchema> out;
    for (auto& src : config.schemas) {
        for (auto& s : load_schemas(src.path, src.format)) {
            auto id = s.db_id;
            if (!out.emplace(id, std::move(s)).second) {
                throw Error(ErrorCode::InvalidArgument, "database '" + id + "' is configured twice");
            }
        }
    }
    return out;
}

namespace {

std::string require_file(const fs::path& p, const char* what) {
    if (!fs::exists(p)) {
        throw Error(ErrorCode::MissingArtifact, std::string(what) + " " + p.string() + " is missing");
    }
    return read_file_bytes(p);
}

std::vector<std::string> enriched_databases(const ArtifactLayout& layout) {
    std::vector<std::string> out;
    auto dir = layout.root / "graph";
    if (!fs::exists(dir)) return out;
    for (auto& entry : fs::directory_iterator(dir)) {
        auto name = entry.path().filename().string();
        const std::string suffix = ".fdg";
        if (name.size() > suffix.size() && name.ends_with(suffix)) out.push_back(name.substr(0, name.size() - suffix.size()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

RerankerShape shape_for(const EngineConfig& config) {
    return {config.provider.dim, config.reranker.hidden_dim,
            config.reranker.key_dim ? config.reranker.key_dim : config.reranker.hidden_dim, config.reranker.layers};
}

}  // namespace

Engine load_engine(const EngineConfig& config, const std::vector<std::string>& dbs, bool require_weights) {
    ArtifactLayout layout{config.artifacts_dir};
    auto provider = make_provider(config.provider);
    RerankerParams params;
    if (fs::exists(layout.weights_file())) {
        params = load_params_file(layout.weights_file());
    } else if (require_weights) {
        throw Error(ErrorCode::MissingArtifact, "reranker weights " + layout.weights_file().string() +
                                                    " are missing; run train first");
    } else {
        params = init_params(shape_for(config), config.seed);
        params.quantize();
    }
    Engine engine(provider, std::move(params), config.context, config.jobs);
    auto ids = dbs.empty() ? enriched_databases(layout) : dbs;
    for (auto& db : ids) {
        auto schema = schema_from_json(json::parse(require_file(layout.schema_file(db), "enriched schema")));
        auto graph = load_graph(require_file(layout.graph_file(db), "graph"));
        auto index = load_index(require_file(layout.index_file(db), "value index"));
        engine.add_database(std::move(schema), std::move(graph), std::move(index));
    }
    return engine;
}

std::vector<EvalQuestion> load_dataset(const fs::path& path, const Engine& engine) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open dataset " + path.string());
    std::vector<EvalQuestion> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto where = path.string() + ":" + std::to_string(line_no);
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::Parse, where + ": " + e.what());
        }
        if (!rec.contains("db_id") || !rec.contains("question")) {
            throw Error(ErrorCode::Parse, where + ": record needs db_id and question");
        }
        EvalQuestion q;
        q.db_id = rec["db_id"].get<std::string>();
        const auto& schema = engine.database(q.db_id).schema;
        auto question = rec["question"].get<std::string>();
        try {
            if (rec.contains("positives")) {
                q.example.question = question;
                q.example.db_id = q.db_id;
                for (auto& p : rec["positives"]) {
                    auto ref = schema.canonical(parse_column_ref(p.get<std::string>()));
                    if (!ref) throw Error(ErrorCode::UnknownColumn, "unknown column " + p.get<std::string>());
                    q.example.positives.insert(*ref);
                }
                if (q.example.positives.empty()) throw Error(ErrorCode::EmptyPositives, "no positive columns");
                for (auto& c : schema.all_columns()) {
                    if (!q.example.positives.count(c)) q.example.negatives.insert(c);
                }
            } else {
                std::vector<std::string> sqls;
                if (rec["sql"].is_array()) {
                    for (auto& s : rec["sql"]) sqls.push_back(s.get<std::string>());
                } else {
                    sqls.push_back(rec["sql"].get<std::string>());
                }
                q.example = build_labeled_example(question, sqls, schema);
                q.example.db_id = q.db_id;
            }
        } catch (const Error& e) {
            throw Error(e.code(), where + ": " + e.what());
        }
        out.push_back(std::move(q));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Commands

namespace {

std::vector<std::string> pick_databases(const std::map<std::string, DatabaseSchema>& all,
                                        const std::vector<std::string>& requested) {
    if (requested.empty()) {
        std::vector<std::string> ids;
        for (auto& [id, _] : all) ids.push_back(id);
        return ids;
    }
    for (auto& id : requested) {
        if (!all.count(id)) throw Error(ErrorCode::InvalidArgument, "database '" + id + "' is not configured");
    }
    return requested;
}

std::string escape_tsv(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '\t') out += "\\t";
        else if (c == '\n') out += "\\n";
        else if (c == '\\') out += "\\\\";
        else out += c;
    }
    return out;
}

json merged_keys_report(const DatabaseSchema& merged, const std::vector<std::string>& warnings,
                        const std::vector<std::string>& sources) {
    json j;
    j["db_id"] = merged.db_id;
    auto& pks = j["primary_keys"] = json::object();
    for (auto& t : merged.tables) pks[t.name] = t.primary_key;
    auto& fks = j["foreign_keys"] = json::array();
    for (auto& fk : merged.foreign_keys) {
        fks.push_back({{"source", fk.source.display()},
                       {"target", fk.target.display()},
                       {"provenance", fk.provenance == Provenance::declared ? "declared" : "predicted"}});
    }
    j["warnings"] = warnings;
    j["key_sources"] = sources;
    return j;
}

/// Per-database outcome, buffered so output order does not depend on scheduling.
struct DbOutcome {
    json entry;
    std::string out;
    std::string err;
    int code = kExitOk;
};

/// Runs fn for every id on up to `jobs` threads; results come back in input order.
std::vector<DbOutcome> for_each_db(const std::vector<std::string>& ids, size_t jobs,
                                   const std::function<DbOutcome(const std::string&)>& fn) {
    std::vector<DbOutcome> results(ids.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t i = next++; i < ids.size(); i = next++) results[i] = fn(ids[i]);
    };
    const size_t lanes = std::max<size_t>(1, std::min(jobs, ids.size()));
    std::vector<std::thread> threads;
    for (size_t j = 1; j < lanes; ++j) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    return results;
}

int emit(const std::vector<DbOutcome>& results, CommandIo io, const fs::path& audit_file) {
    json audit = json::array();
    int worst = kExitOk;
    for (auto& r : results) {
        io.out << r.out;
        io.err << r.err;
        worst = std::max(worst, r.code);
        audit.push_back(r.entry);
    }
    if (!results.empty()) write_file_atomic(audit_file, audit.dump(2) + "\n");
    return worst;
}

}  // namespace

int cmd_enrich(const EngineConfig& config, const std::vector<std::string>& dbs, CommandIo io) {
    ArtifactLayout layout{config.artifacts_dir};
    auto schemas = load_configured_schemas(config);
    auto ids = pick_databases(schemas, dbs);
    std::unique_ptr<RemoteClient> remote;
    if (config.key_predictor == "remote") {
        RemoteConfig rc;
        rc.endpoint = config.provider.endpoint;
        rc.model_hint = config.provider.model_hint;
        rc.timeout_ms = config.provider.timeout_ms;
        rc.retries = config.provider.retries;
        if (const char* token = std::getenv("SCHEMASIFT_AUTH_TOKEN")) rc.auth_token = token;
        remote = std::make_unique<RemoteClient>(rc);
    }
    auto results = for_each_db(ids, config.jobs, [&](const std::string& id) {
        DbOutcome r;
        r.entry = {{"db_id", id}};
        std::ostringstream out, err;
        try {
            auto schema = schemas.at(id);
            std::vector<std::string> warnings, sources{"declared"};
            auto apply = [&](const KeyPrediction& p, const std::string& source) {
                auto merged = merge_keys(schema, p);
                schema = std::move(merged.schema);
                warnings.insert(warnings.end(), merged.warnings.begin(), merged.warnings.end());
                sources.push_back(source);
            };
            if (auto it = config.key_predictions.find(id); it != config.key_predictions.end()) {
                apply(key_prediction_from_json(json::parse(read_file_bytes(it->second))), "file:" + it->second.string());
                r.entry["key_file"] = it->second.string();
            }
            if (config.key_predictor == "heuristic") apply(infer_keys_heuristic(schema), "heuristic");
            if (remote) apply(remote_predict_keys(*remote, schema), "remote");
            validate(schema);
            auto graph = build_fd_graph(schema);
            write_file_atomic(layout.graph_file(id), serialize_graph(graph));
            write_file_atomic(layout.schema_file(id), serialize_schema(schema));
            write_file_atomic(layout.keys_report(id), merged_keys_report(schema, warnings, sources).dump(2) + "\n");
            for (auto& w : warnings) err << id << ": warning: " << w << "\n";
            r.entry["status"] = "ok";
            r.entry["nodes"] = graph.node_count();
            r.entry["edges"] = graph.edges().size();
            r.entry["foreign_keys"] = schema.foreign_keys.size();
            out << id << "\t" << graph.node_count() << " columns\t" << graph.edges().size() << " edges\n";
        } catch (const Error& e) {
            r.entry["status"] = "failed";
            r.entry["error"] = e.what();
            err << id << ": " << e.what() << "\n";
            r.code = exit_code_for(e.code()) == kExitProvider ? int{kExitProvider} : int{kExitData};
        } catch (const json::exception& e) {
            r.entry["status"] = "failed";
            r.entry["error"] = e.what();
            err << id << ": " << e.what() << "\n";
            r.code = kExitData;
        }
        r.out = out.str();
        r.err = err.str();
        return r;
    });
    return emit(results, io, layout.reports_dir() / "enrich_audit.json");
}

int cmd_index(const EngineConfig& config, const std::vector<std::string>& dbs, CommandIo io) {
    ArtifactLayout layout{config.artifacts_dir};
    auto schemas = load_configured_schemas(config);
    auto ids = pick_databases(schemas, dbs);
    auto results = for_each_db(ids, config.jobs, [&](const std::string& id) {
        DbOutcome r;
        r.entry = {{"db_id", id}};
        try {
            const auto& schema = schemas.at(id);
            std::vector<std::pair<ColumnRef, std::string>> cells;
            if (auto it = config.value_dumps.find(id); it != config.value_dumps.end()) {
                cells = parse_value_dump(read_file_bytes(it->second), schema);
                r.entry["source"] = it->second.string();
            } else {
                for (auto& t : schema.tables) {
                    for (auto& c : t.columns) {
                        for (auto& v : c.sample_values) cells.push_back({{t.name, c.name}, v});
                    }
                }
                r.entry["source"] = "sample_values";
            }
            auto index = build_value_index(schema, cells);
            write_file_atomic(layout.index_file(id), serialize_index(index));
            r.entry["status"] = "ok";
            r.entry["cells"] = cells.size();
            r.out = id + "\t" + std::to_string(cells.size()) + " values indexed\n";
        } catch (const Error& e) {
            r.entry["status"] = "failed";
            r.entry["error"] = e.what();
            r.err = id + ": " + e.what() + "\n";
            r.code = kExitData;
        }
        return r;
    });
    return emit(results, io, layout.reports_dir() / "index_audit.json");
}

int cmd_train(const EngineConfig& config, const fs::path& dataset, CommandIo io) {
    ArtifactLayout layout{config.artifacts_dir};
    auto engine = load_engine(config, {}, false);
    auto questions = load_dataset(dataset, engine);
    std::vector<TrainingExample> examples;
    examples.reserve(questions.size());
    for (auto& q : questions) examples.push_back(make_training_example(engine, q));

    TrainingConfig tc;
    tc.margin = config.reranker.margin;
    tc.learning_rate = config.reranker.learning_rate;
    tc.epochs = config.reranker.epochs;
    tc.batch_size = config.reranker.batch_size;
    tc.negatives_per_positive = config.reranker.negatives_per_positive;
    tc.seed = config.seed;
    tc.num_layers = config.reranker.layers;
    tc.hidden_dim = config.reranker.hidden_dim;
    tc.key_dim = config.reranker.key_dim;
    auto result = train(examples, tc, config.provider.dim);
    save_params(result.params, layout.weights_file());
    write_file_atomic(layout.reports_dir() / "loss_trace.csv", format_loss_trace(result.trace));
    io.out << "trained on " << examples.size() << " questions for " << tc.epochs << " epochs";
    if (!result.epoch_loss.empty()) {
        io.out << "; epoch loss " << result.epoch_loss.front() << " -> " << result.epoch_loss.back();
    }
    io.out << "\nweights: " << layout.weights_file().string() << "\n";
    return kExitOk;
}

int cmd_filter(const EngineConfig& config, const std::string& question, const std::string& db, CommandIo io) {
    if (question.empty()) throw Error(ErrorCode::InvalidArgument, "filter needs --question");
    if (db.empty()) throw Error(ErrorCode::InvalidArgument, "filter needs --db");
    auto engine = load_engine(config, {db}, true);
    auto resp = engine.filter({question, db, config.selection, config.steiner});
    io.out << to_json(resp).dump(2) << "\n";
    return kExitOk;
}

int cmd_eval(const EngineConfig& config, const fs::path& dataset, CommandIo io) {
    ArtifactLayout layout{config.artifacts_dir};
    auto engine = load_engine(config, {}, true);
    auto questions = load_dataset(dataset, engine);
    if (questions.empty()) throw Error(ErrorCode::InvalidArgument, "evaluation set is empty");
    SweepOptions opts;
    opts.recall_floor = config.recall_floor;
    if (config.selection.mode == Selection::Mode::top_percent) opts.top_fraction = config.selection.value;
    auto result = evaluate(engine, questions, opts, config.selection);
    auto report = to_json(result.report);
    auto dir = layout.reports_dir();
    write_file_atomic(dir / "eval.json", report.dump(2) + "\n");
    write_file_atomic(dir / "threshold_curve.csv", curve_csv(result.report.threshold_curve, "threshold"));
    write_file_atomic(dir / "k_curve.csv", curve_csv(result.report.k_curve, "k"));
    std::string per_question;
    for (auto& q : result.questions) {
        json j{{"db_id", q.db_id},
               {"question", q.question},
               {"roc_auc", q.roc_auc},
               {"raw", {{"precision", q.at_selection_raw.precision}, {"recall", q.at_selection_raw.recall}}},
               {"closed", {{"precision", q.at_selection_closed.precision}, {"recall", q.at_selection_closed.recall}}}};
        per_question += j.dump() + "\n";
    }
    write_file_atomic(dir / "eval_questions.jsonl", per_question);
    char line[256];
    std::snprintf(line, sizeof(line),
                  "questions %zu  roc_auc %.4f  pr_auc %.4f  recall@%.2f %.4f  precision %.4f\n",
                  result.questions.size(), result.report.roc_auc, result.report.pr_auc, config.recall_floor,
                  result.report.operating_point.recall,
                  result.report.operating_point.precision);
    io.out << line;
    if (result.report.top_fraction > 0) {
        std::snprintf(line, sizeof(line), "top %.0f%%: raw recall %.4f  closed recall %.4f  closed precision %.4f\n",
                      result.report.top_fraction * 100, result.report.top_fraction_raw.recall,
                      result.report.top_fraction_closed.recall, result.report.top_fraction_closed.precision);
        io.out << line;
    }
    return kExitOk;
}

int cmd_bench(const EngineConfig& config, const std::vector<std::string>& dbs,
              const std::optional<fs::path>& questions, const std::vector<std::string>& inline_questions,
              size_t repeats, CommandIo io) {
    ArtifactLayout layout{config.artifacts_dir};
    auto engine = load_engine(config, dbs, true);
    std::vector<std::pair<std::string, std::string>> work;
    if (questions) {
        std::ifstream in(*questions);
        if (!in) throw Error(ErrorCode::Io, "cannot open question file " + questions->string());
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            auto rec = json::parse(line);
            auto db = rec.at("db_id").get<std::string>();
            if (dbs.empty() || std::find(dbs.begin(), dbs.end(), db) != dbs.end()) {
                work.push_back({db, rec.at("question").get<std::string>()});
            }
        }
    }
    for (auto& q : inline_questions) {
        for (auto& db : dbs.empty() ? engine.database_ids() : dbs) work.push_back({db, q});
    }
    auto result = bench(engine, work, config.selection, repeats);
    write_file_atomic(layout.reports_dir() / "bench.csv", bench_rows_csv(result));
    write_file_atomic(layout.reports_dir() / "bench_summary.csv", bench_summary_csv(result));
    io.out << bench_summary_csv(result);
    return kExitOk;
}

int cmd_gen(const GenOptions& options, CommandIo io) {
    if (options.out_dir.empty()) throw Error(ErrorCode::InvalidArgument, "gen needs --out");
    std::vector<SyntheticDatabase> dbs;
    std::string questions;
    if (options.kind == "planted") {
        PlantedOptions po;
        po.seed = options.seed;
        po.questions = options.questions;
        po.databases = options.databases;
        po.tables = options.tables;
        if (options.tables == 0 || options.columns % options.tables != 0) {
            throw Error(ErrorCode::InvalidArgument, "planted corpus needs columns divisible by tables");
        }
        po.columns_per_table = options.columns / options.tables;
        auto corpus = generate_planted_corpus(po);
        dbs = std::move(corpus.databases);
        for (auto& q : corpus.questions) {
            questions += json{{"db_id", q.db_id}, {"question", q.question}, {"sql", q.sql}}.dump() + "\n";
        }
    } else if (options.kind == "wide") {
        dbs.push_back(generate_wide_database(options.tables, options.columns, options.seed));
    } else {
        throw Error(ErrorCode::InvalidArgument, "gen kind must be planted or wide");
    }
    EngineConfig config;
    config.artifacts_dir = "artifacts";
    for (auto& db : dbs) {
        auto schema_rel = fs::path("schemas") / (db.schema.db_id + ".json");
        auto values_rel = fs::path("values") / (db.schema.db_id + ".tsv");
        write_file_atomic(options.out_dir / schema_rel, serialize_schema(db.schema));
        std::string tsv;
        for (auto& [ref, v] : db.cells) tsv += escape_tsv(ref.table) + "\t" + escape_tsv(ref.column) + "\t" + escape_tsv(v) + "\n";
        write_file_atomic(options.out_dir / values_rel, tsv);
        config.schemas.push_back({schema_rel, SchemaFormat::native});
        config.value_dumps[db.schema.db_id] = values_rel;
    }
    if (!questions.empty()) write_file_atomic(options.out_dir / "questions.jsonl", questions);
    config.seed = options.seed;
    write_file_atomic(options.out_dir / "config.json", config_to_json(config).dump(2) + "\n");
    io.out << "wrote " << dbs.size() << " database(s) to " << options.out_dir.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------------------------
// Entry point

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Question-aware schema filtering: enrich, index, train, filter, eval, bench"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> dbs;
    std::string question;
    std::optional<size_t> top_k;
    std::optional<double> top_percent, threshold;
    bool no_steiner = false;
    std::optional<size_t> jobs;
    std::optional<uint64_t> seed;
    std::optional<std::string> provider;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Engine config file (JSON)");
        cmd->add_option("--db", dbs, "Database id (repeatable; default: all)");
        cmd->add_option("--jobs", jobs, "Parallel workers");
        cmd->add_option("--seed", seed, "Seed for every random choice");
        cmd->add_option("--provider", provider, "Provider kind: hash or remote");
    };
    auto add_selection = [&](CLI::App* cmd) {
        auto* k = cmd->add_option("--top-k", top_k, "Keep the k best columns");
        auto* p = cmd->add_option("--top-percent", top_percent, "Keep this fraction of columns, in (0, 1]");
        auto* t = cmd->add_option("--threshold", threshold, "Keep columns scoring at least this");
        k->excludes(p)->excludes(t);
        p->excludes(t);
        cmd->add_flag("--no-steiner", no_steiner, "Skip the join-key closure");
    };

    auto* enrich = app.add_subcommand("enrich", "Recover keys and build dependency graphs");
    add_common(enrich);
    auto* index = app.add_subcommand("index", "Build per-column value indexes");
    add_common(index);
    std::string dataset;
    auto* train_cmd = app.add_subcommand("train", "Train the graph reranker");
    add_common(train_cmd);
    train_cmd->add_option("--dataset", dataset, "JSON-lines questions with gold SQL")->required();
    std::optional<size_t> epochs;
    std::optional<double> learning_rate;
    train_cmd->add_option("--epochs", epochs, "Override reranker.epochs");
    train_cmd->add_option("--learning-rate", learning_rate, "Override reranker.learning_rate");
    auto* filter = app.add_subcommand("filter", "Select the columns needed for one question");
    add_common(filter);
    add_selection(filter);
    filter->add_option("--question", question, "Natural-language question")->required();
    auto* eval = app.add_subcommand("eval", "Score a labeled question set and write reports");
    add_common(eval);
    add_selection(eval);
    eval->add_option("--dataset", dataset, "JSON-lines questions with gold SQL")->required();
    auto* bench_cmd = app.add_subcommand("bench", "Measure filter latency");
    add_common(bench_cmd);
    add_selection(bench_cmd);
    std::string questions_file;
    size_t repeats = 1;
    bench_cmd->add_option("--questions", questions_file, "JSON-lines questions");
    bench_cmd->add_option("--question", question, "A single question run against every database");
    bench_cmd->add_option("--repeats", repeats, "Runs per question");
    GenOptions gen_opts;
    auto* gen = app.add_subcommand("gen", "Write a synthetic corpus");
    gen->add_option("kind", gen_opts.kind, "planted or wide")->required();
    gen->add_option("--out", gen_opts.out_dir, "Output directory")->required();
    gen->add_option("--seed", gen_opts.seed, "Generator seed");
    gen->add_option("--questions", gen_opts.questions, "Question count (planted)");
    gen->add_option("--databases", gen_opts.databases, "Database count (planted)");
    gen->add_option("--tables", gen_opts.tables, "Tables per database");
    gen->add_option("--columns", gen_opts.columns, "Columns per database");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::ostringstream msg;
        app.exit(e, out, msg);
        err << msg.str();
        return kExitUsage;
    }

    try {
        CommandIo io{out, err};
        if (gen->parsed()) return cmd_gen(gen_opts, io);

        EngineConfig config;
        if (!config_path.empty()) {
            config = load_config(config_path);
        } else {
            config.artifacts_dir = "artifacts";
        }
        if (jobs) config.jobs = *jobs;
        if (seed) config.seed = *seed;
        if (provider) config.provider.kind = *provider;
        if (epochs) config.reranker.epochs = *epochs;
        if (learning_rate) config.reranker.learning_rate = *learning_rate;
        if (top_k) config.selection = Selection::top_k(*top_k);
        if (top_percent) config.selection = Selection::top_percent(*top_percent);
        if (threshold) config.selection = Selection::threshold(*threshold);
        if (no_steiner) config.steiner = false;
        config.validate();

        if (enrich->parsed()) return cmd_enrich(config, dbs, io);
        if (index->parsed()) return cmd_index(config, dbs, io);
        if (train_cmd->parsed()) return cmd_train(config, dataset, io);
        if (filter->parsed()) return cmd_filter(config, question, dbs.empty() ? "" : dbs.front(), io);
        if (eval->parsed()) return cmd_eval(config, dataset, io);
        if (bench_cmd->parsed()) {
            std::optional<fs::path> qf;
            if (!questions_file.empty()) qf = questions_file;
            std::vector<std::string> inline_q;
            if (!question.empty()) inline_q.push_back(question);
            return cmd_bench(config, dbs, qf, inline_q, repeats, io);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace schemasift
