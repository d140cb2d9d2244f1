#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "schemasift/column_encoder.h"
#include "schemasift/error.h"
#include "schemasift/pipeline.h"
#include "schemasift/schema.h"

namespace schemasift {

struct ProviderConfig {
    std::string kind = "hash";  // hash | remote
    size_t dim = 256;
    std::string endpoint;
    std::string model_hint;
    size_t max_batch = 32;
    size_t max_in_flight = 4;
    int timeout_ms = 30000;
    int retries = 2;
    std::string cache_dir;  // empty: no embedding cache
};

struct RerankerConfig {
    size_t layers = 3;
    size_t hidden_dim = 256;
    size_t key_dim = 0;  // 0: hidden_dim
    double margin = 1.0;
    double learning_rate = 5e-5;
    size_t epochs = 40;
    size_t batch_size = 32;
    size_t negatives_per_positive = 7;
};

struct SchemaSource {
    std::filesystem::path path;
    SchemaFormat format = SchemaFormat::native;
};

/// One JSON file drives every command; command-line flags override individual fields.
/// Relative paths are resolved against the config file's directory.
struct EngineConfig {
    std::vector<SchemaSource> schemas;
    std::map<std::string, std::filesystem::path> value_dumps;      // db_id -> TSV dump
    std::map<std::string, std::filesystem::path> key_predictions;  // db_id -> external prediction JSON
    std::filesystem::path artifacts_dir = "artifacts";
    std::string key_predictor = "heuristic";  // heuristic | remote | none
    ProviderConfig provider;
    RerankerConfig reranker;
    ContextOptions context;
    uint64_t seed = 0;
    Selection selection;
    bool steiner = true;
    double recall_floor = 0.99;
    size_t jobs = 1;

    /// Throws InvalidArgument naming the offending field.
    void validate() const;
};

EngineConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
nlohmann::json config_to_json(const EngineConfig& config);
EngineConfig load_config(const std::filesystem::path& path);

/// Where each command reads and writes inside the artifacts directory.
struct ArtifactLayout {
    std::filesystem::path root;

    std::filesystem::path graph_file(const std::string& db) const { return root / "graph" / (db + ".fdg"); }
    std::filesystem::path schema_file(const std::string& db) const { return root / "graph" / (db + ".schema.json"); }
    std::filesystem::path keys_report(const std::string& db) const { return root / "graph" / (db + ".keys.json"); }
    std::filesystem::path index_file(const std::string& db) const { return root / "index" / (db + ".vidx"); }
    std::filesystem::path weights_file() const { return root / "weights" / "reranker.bin"; }
    std::filesystem::path reports_dir() const { return root / "reports"; }
};

/// Process exit codes.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitProvider = 3 };
int exit_code_for(ErrorCode code);

std::shared_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config);

/// Every configured schema, keyed by db_id.
std::map<std::string, DatabaseSchema> load_configured_schemas(const EngineConfig& config);

/// Engine over the enriched and indexed databases in `dbs` (all enriched ones when empty).
/// With `require_weights` false and no weights file, the reranker starts from its seeded
/// initialization. Missing artifacts raise MissingArtifact naming the file.
Engine load_engine(const EngineConfig& config, const std::vector<std::string>& dbs, bool require_weights);

/// A training/evaluation record: {"db_id", "question", "sql": str | [str]} or, with explicit
/// labels, {"db_id", "question", "positives": ["T.c", ...]}. One JSON object per line.
std::vector<EvalQuestion> load_dataset(const std::filesystem::path& path, const Engine& engine);

struct CommandIo {
    std::ostream& out;
    std::ostream& err;
};

int cmd_enrich(const EngineConfig& config, const std::vector<std::string>& dbs, CommandIo io);
int cmd_index(const EngineConfig& config, const std::vector<std::string>& dbs, CommandIo io);
int cmd_train(const EngineConfig& config, const std::filesystem::path& dataset, CommandIo io);
int cmd_filter(const EngineConfig& config, const std::string& question, const std::string& db, CommandIo io);
int cmd_eval(const EngineConfig& config, const std::filesystem::path& dataset, CommandIo io);
int cmd_bench(const EngineConfig& config, const std::vector<std::string>& dbs,
              const std::optional<std::filesystem::path>& questions, const std::vector<std::string>& inline_questions,
              size_t repeats, CommandIo io);

struct GenOptions {
    std::string kind = "planted";  // planted | wide
    std::filesystem::path out_dir;
    uint64_t seed = 1;
    size_t questions = 50;
    size_t databases = 5;
    size_t tables = 20;
    size_t columns = 200;  // total per database
};

/// Writes synthetic schemas, value dumps, a question file and a ready-to-use config.json.
int cmd_gen(const GenOptions& options, CommandIo io);

/// Argument parsing and dispatch; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace schemasift
