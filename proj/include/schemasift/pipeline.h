#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "schemasift/column_encoder.h"
#include "schemasift/fd_graph.h"
#include "schemasift/metrics.h"
#include "schemasift/reranker.h"
#include "schemasift/steiner.h"
#include "schemasift/value_index.h"

namespace schemasift {

struct Selection {
    enum class Mode { top_k, top_percent, threshold };
    Mode mode = Mode::top_percent;
    double value = 0.2;

    static Selection top_k(size_t k) { return {Mode::top_k, static_cast<double>(k)}; }
    static Selection top_percent(double fraction) { return {Mode::top_percent, fraction}; }
    static Selection threshold(double t) { return {Mode::threshold, t}; }
    void validate() const;
};

const char* to_string(Selection::Mode m);
Selection::Mode parse_selection_mode(std::string_view s);

struct FilterRequest {
    std::string question;
    std::string db_id;
    Selection selection;
    bool steiner_enabled = true;
};

/// Wall-clock milliseconds per stage.
struct StageTimings {
    double context_ms = 0;
    double embed_ms = 0;
    double forward_ms = 0;
    double steiner_ms = 0;
    double total_ms = 0;
};

struct SelectedColumn {
    ColumnRef column;
    double score;
    bool terminal;  // picked by score; false for columns re-inserted to keep joins valid
};

struct FilterResponse {
    std::string db_id;
    std::string question;
    std::vector<ColumnRef> columns;  // node order
    std::vector<double> scores;      // parallel to `columns`
    std::vector<SelectedColumn> selected;
    std::vector<std::string> tables;         // tables owning a selected column
    std::vector<ForeignKey> foreign_keys;    // both endpoints selected
    StageTimings timings;
};

nlohmann::json to_json(const FilterResponse& response);

/// Everything the engine needs about one database. Keys are expected to be merged already.
struct DatabaseState {
    DatabaseSchema schema;
    FdGraph graph;
    std::unique_ptr<GraphPlan> plan;
    std::optional<ValueIndex> index;
};

/// Question-to-subschema pipeline over shared immutable state: column contexts, provider
/// embeddings, graph reranking and optional connectivity closure.
class Engine {
   public:
    Engine(std::shared_ptr<EmbeddingProvider> provider, RerankerParams params, ContextOptions context_options = {},
           size_t jobs = 1);

    /// Builds the graph from the schema when `graph` is not given.
    void add_database(DatabaseSchema schema, std::optional<FdGraph> graph = std::nullopt,
                      std::optional<ValueIndex> index = std::nullopt);
    bool has_database(const std::string& db_id) const { return databases_.count(db_id) > 0; }
    /// Throws InvalidArgument naming the database when it is unknown.
    const DatabaseState& database(const std::string& db_id) const;
    std::vector<std::string> database_ids() const;

    const RerankerParams& params() const { return params_; }
    void set_params(RerankerParams params);
    EmbeddingProvider& provider() const { return *provider_; }
    size_t jobs() const { return jobs_; }

    /// Provider embeddings of every column for the question, in node order.
    RowMatrix embed_columns(const std::string& db_id, const std::string& question, StageTimings* timings = nullptr) const;
    std::vector<double> score_columns(const std::string& db_id, const std::string& question,
                                      StageTimings* timings = nullptr) const;

    FilterResponse filter(const FilterRequest& request) const;

   private:
    std::shared_ptr<EmbeddingProvider> provider_;
    RerankerParams params_;
    ContextOptions context_options_;
    size_t jobs_;
    std::map<std::string, DatabaseState> databases_;
};

/// Terminal picks for a selection mode. `threshold` may select nothing.
std::vector<uint32_t> select_terminals(std::span<const double> scores, const Selection& selection);

/// Mask of the columns kept after closing the given raw selection over the graph.
std::vector<bool> close_selection(const FdGraph& graph, const std::vector<bool>& raw);

/// A labeled question against one database of the engine.
struct EvalQuestion {
    std::string db_id;
    LabeledExample example;
};

TrainingExample make_training_example(const Engine& engine, const EvalQuestion& question);

struct QuestionResult {
    std::string db_id;
    std::string question;
    std::vector<double> scores;
    std::vector<int> labels;
    double roc_auc = 0;  // 0 when the question has a single class
    PrfPoint at_selection_raw;
    PrfPoint at_selection_closed;
};

struct EvaluationOutput {
    EvalReport report;
    std::vector<QuestionResult> questions;
};

/// Scores every question, then runs the sweeps with closure over each question's graph.
/// `selection` fixes the per-question operating point reported in QuestionResult.
EvaluationOutput evaluate(const Engine& engine, const std::vector<EvalQuestion>& questions,
                          const SweepOptions& options, const Selection& selection);

nlohmann::json to_json(const EvalReport& report);

struct BenchRow {
    std::string db_id;
    size_t columns = 0;
    size_t tables = 0;
    size_t question_index = 0;
    StageTimings timings;
};

struct BenchSummary {
    std::string db_id;
    size_t columns = 0;
    size_t tables = 0;
    size_t runs = 0;
    double median_ms = 0;
    double p95_ms = 0;
};

struct BenchResult {
    std::vector<BenchRow> rows;
    std::vector<BenchSummary> summary;  // sorted by column count, then db id
};

/// Times filter() for every (database, question) pair `repeats` times.
BenchResult bench(const Engine& engine, const std::vector<std::pair<std::string, std::string>>& questions,
                  const Selection& selection, size_t repeats = 1);

std::string bench_rows_csv(const BenchResult& result);
std::string bench_summary_csv(const BenchResult& result);

/// Nearest-rank percentile of an unsorted sample; 0 for an empty one.
double percentile(std::vector<double> values, double p);

}  // namespace schemasift
