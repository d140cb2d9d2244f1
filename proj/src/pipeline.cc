#include "schemasift/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "schemasift/error.h"

namespace schemasift {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

/// Runs fn(begin, end) over contiguous slices of [0, n) on up to `jobs` threads.
template <class Fn>
void parallel_for(size_t n, size_t jobs, Fn&& fn) {
    jobs = std::max<size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        if (n) fn(size_t{0}, n);
        return;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(jobs);
    const size_t chunk = (n + jobs - 1) / jobs;
    for (size_t j = 0; j < jobs; ++j) {
        threads.emplace_back([&, j] {
            try {
                const size_t begin = j * chunk, end = std::min(n, begin + chunk);
                if (begin < end) fn(begin, end);
            } catch (...) {
                errors[j] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

void Selection::validate() const {
    switch (mode) {
        case Mode::top_k:
            if (value < 1 || value != std::floor(value)) {
                throw Error(ErrorCode::InvalidArgument, "top_k must be a positive integer");
            }
            break;
        case Mode::top_percent:
            if (!(value > 0 && value <= 1)) throw Error(ErrorCode::InvalidArgument, "top_percent must lie in (0, 1]");
            break;
        case Mode::threshold:
            if (!std::isfinite(value)) throw Error(ErrorCode::InvalidArgument, "threshold must be finite");
            break;
    }
}

const char* to_string(Selection::Mode m) {
    switch (m) {
        case Selection::Mode::top_k: return "top_k";
        case Selection::Mode::top_percent: return "top_percent";
        case Selection::Mode::threshold: return "threshold";
    }
    return "?";
}

Selection::Mode parse_selection_mode(std::string_view s) {
    if (s == "top_k") return Selection::Mode::top_k;
    if (s == "top_percent") return Selection::Mode::top_percent;
    if (s == "threshold") return Selection::Mode::threshold;
    throw Error(ErrorCode::InvalidArgument, "unknown selection mode '" + std::string(s) + "'");
}

Engine::Engine(std::shared_ptr<EmbeddingProvider> provider, RerankerParams params, ContextOptions context_options,
               size_t jobs)
    : provider_(std::move(provider)), context_options_(context_options), jobs_(std::max<size_t>(1, jobs)) {
    if (!provider_) throw Error(ErrorCode::InvalidArgument, "engine needs a provider");
    set_params(std::move(params));
}

void Engine::set_params(RerankerParams params) {
    if (params.shape.input_dim != provider_->dim()) {
        throw Error(ErrorCode::DimensionMismatch, "reranker expects " + std::to_string(params.shape.input_dim) +
                                                      "-dim inputs, provider gives " +
                                                      std::to_string(provider_->dim()));
    }
    params_ = std::move(params);
}

void Engine::add_database(DatabaseSchema schema, std::optional<FdGraph> graph, std::optional<ValueIndex> index) {
    DatabaseState state;
    state.graph = graph ? std::move(*graph) : build_fd_graph(schema);
    if (state.graph.node_count() != schema.column_count()) {
        throw Error(ErrorCode::ShapeMismatch, "graph of " + schema.db_id + " does not match its schema");
    }
    state.plan = std::make_unique<GraphPlan>(state.graph);
    state.schema = std::move(schema);
    state.index = std::move(index);
    auto id = state.schema.db_id;
    databases_[id] = std::move(state);
}

const DatabaseState& Engine::database(const std::string& db_id) const {
    auto it = databases_.find(db_id);
    if (it == databases_.end()) throw Error(ErrorCode::InvalidArgument, "unknown database '" + db_id + "'");
    return it->second;
}

std::vector<std::string> Engine::database_ids() const {
    std::vector<std::string> ids;
    for (auto& [id, _] : databases_) ids.push_back(id);
    return ids;
}

RowMatrix Engine::embed_columns(const std::string& db_id, const std::string& question, StageTimings* timings) const {
    const auto& db = database(db_id);
    const auto& nodes = db.graph.nodes();
    const size_t n = nodes.size();
    auto t0 = Clock::now();
    std::vector<EmbedItem> items(n);
    const ValueIndex* index = db.index ? &*db.index : nullptr;
    parallel_for(n, jobs_, [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            items[i].query = question;
            items[i].context = assemble_context(db.schema, nodes[i], question, index, context_options_);
        }
    });
    if (timings) timings->context_ms += elapsed_ms(t0);

    t0 = Clock::now();
    const size_t dim = provider_->dim();
    RowMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    const size_t lanes = std::min(jobs_, provider_->max_in_flight());
    parallel_for(n, lanes, [&](size_t begin, size_t end) {
        auto vectors = provider_->embed_batch(std::span<const EmbedItem>(items).subspan(begin, end - begin));
        if (vectors.size() != end - begin) {
            throw Error(ErrorCode::MalformedResponse, "provider returned " + std::to_string(vectors.size()) +
                                                          " embeddings for " + std::to_string(end - begin) + " items");
        }
        for (size_t i = begin; i < end; ++i) {
            check_embedding(vectors[i - begin], dim);
            for (size_t k = 0; k < dim; ++k) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = vectors[i - begin].values[k];
        }
    });
    if (timings) timings->embed_ms += elapsed_ms(t0);
    return out;
}

std::vector<double> Engine::score_columns(const std::string& db_id, const std::string& question,
                                          StageTimings* timings) const {
    auto h0 = embed_columns(db_id, question, timings);
    auto t0 = Clock::now();
    const auto& db = database(db_id);
    auto s = score(forward(*db.plan, h0, params_), params_);
    if (timings) timings->forward_ms += elapsed_ms(t0);
    return {s.data(), s.data() + s.size()};
}

std::vector<uint32_t> select_terminals(std::span<const double> scores, const Selection& selection) {
    selection.validate();
    switch (selection.mode) {
        case Selection::Mode::top_k:
            return top_m(scores, static_cast<size_t>(selection.value));
        case Selection::Mode::top_percent:
            return top_m(scores, static_cast<size_t>(std::ceil(selection.value * static_cast<double>(scores.size()) - 1e-9)));
        case Selection::Mode::threshold: {
            std::vector<uint32_t> out;
            for (uint32_t i = 0; i < scores.size(); ++i) {
                if (scores[i] >= selection.value) out.push_back(i);
            }
            return out;
        }
    }
    return {};
}

std::vector<bool> close_selection(const FdGraph& graph, const std::vector<bool>& raw) {
    std::vector<uint32_t> terminals;
    for (uint32_t i = 0; i < raw.size(); ++i) {
        if (raw[i]) terminals.push_back(i);
    }
    if (terminals.empty()) return raw;
    auto tree = greedy_steiner(graph, terminals);
    std::vector<bool> mask(raw.size(), false);
    for (auto x : tree.nodes) mask[x] = true;
    return mask;
}

FilterResponse Engine::filter(const FilterRequest& request) const {
    request.selection.validate();
    auto start = Clock::now();
    const auto& db = database(request.db_id);
    FilterResponse resp;
    resp.db_id = request.db_id;
    resp.question = request.question;
    resp.scores = score_columns(request.db_id, request.question, &resp.timings);
    resp.columns = db.graph.nodes();

    auto t0 = Clock::now();
    auto terminals = select_terminals(resp.scores, request.selection);
    std::vector<int> role(resp.columns.size(), 0);  // 0 unselected, 1 terminal, 2 auxiliary
    for (auto t : terminals) role[t] = 1;
    if (request.steiner_enabled && !terminals.empty()) {
        auto tree = greedy_steiner(db.graph, terminals);
        for (auto x : tree.auxiliary) role[x] = 2;
    }
    resp.timings.steiner_ms = elapsed_ms(t0);

    std::vector<bool> table_used(db.schema.tables.size(), false);
    for (uint32_t i = 0; i < role.size(); ++i) {
        if (!role[i]) continue;
        resp.selected.push_back({resp.columns[i], resp.scores[i], role[i] == 1});
        table_used[db.graph.table_of(i)] = true;
    }
    for (size_t t = 0; t < table_used.size(); ++t) {
        if (table_used[t]) resp.tables.push_back(db.schema.tables[t].name);
    }
    for (auto& fk : db.schema.foreign_keys) {
        auto s = db.graph.index_of(fk.source), d = db.graph.index_of(fk.target);
        if (s && d && role[*s] && role[*d]) resp.foreign_keys.push_back(fk);
    }
    resp.timings.total_ms = elapsed_ms(start);
    return resp;
}

nlohmann::json to_json(const FilterResponse& r) {
    nlohmann::json j;
    j["db_id"] = r.db_id;
    j["question"] = r.question;
    auto& sel = j["selected"] = nlohmann::json::array();
    for (auto& c : r.selected) {
        sel.push_back({{"column", c.column.display()}, {"score", c.score}, {"role", c.terminal ? "terminal" : "auxiliary"}});
    }
    j["tables"] = r.tables;
    auto& fks = j["foreign_keys"] = nlohmann::json::array();
    for (auto& fk : r.foreign_keys) fks.push_back({{"source", fk.source.display()}, {"target", fk.target.display()}});
    auto& scores = j["scores"] = nlohmann::json::array();
    for (size_t i = 0; i < r.columns.size(); ++i) scores.push_back({{"column", r.columns[i].display()}, {"score", r.scores[i]}});
    j["timings_ms"] = {{"context", r.timings.context_ms},
                       {"embed", r.timings.embed_ms},
                       {"forward", r.timings.forward_ms},
                       {"steiner", r.timings.steiner_ms},
                       {"total", r.timings.total_ms}};
    return j;
}

namespace {

std::pair<std::vector<uint32_t>, std::vector<uint32_t>> label_nodes(const FdGraph& graph, const LabeledExample& ex) {
    std::vector<uint32_t> pos, neg;
    std::vector<bool> is_pos(graph.node_count(), false);
    for (auto& c : ex.positives) {
        auto i = graph.index_of(c);
        if (!i) throw Error(ErrorCode::UnknownColumn, "labeled column " + c.display() + " is not in the graph");
        is_pos[*i] = true;
    }
    for (uint32_t i = 0; i < graph.node_count(); ++i) (is_pos[i] ? pos : neg).push_back(i);
    return {pos, neg};
}

}  // namespace

TrainingExample make_training_example(const Engine& engine, const EvalQuestion& question) {
    const auto& db = engine.database(question.db_id);
    TrainingExample ex;
    ex.plan = db.plan.get();
    ex.embeddings = engine.embed_columns(question.db_id, question.example.question);
    std::tie(ex.positives, ex.negatives) = label_nodes(db.graph, question.example);
    return ex;
}

EvaluationOutput evaluate(const Engine& engine, const std::vector<EvalQuestion>& questions,
                          const SweepOptions& options, const Selection& selection) {
    EvaluationOutput out;
    std::vector<EvalExample> examples;
    for (auto& q : questions) {
        const auto& db = engine.database(q.db_id);
        QuestionResult r;
        r.db_id = q.db_id;
        r.question = q.example.question;
        r.scores = engine.score_columns(q.db_id, q.example.question);
        auto [pos, neg] = label_nodes(db.graph, q.example);
        r.labels.assign(r.scores.size(), 0);
        for (auto p : pos) r.labels[p] = 1;
        if (!pos.empty() && !neg.empty()) r.roc_auc = roc_auc(r.scores, r.labels);
        const FdGraph* graph = &db.graph;
        EvalExample ex{r.scores, r.labels, [graph](const std::vector<bool>& raw) { return close_selection(*graph, raw); }};
        std::vector<bool> raw(r.scores.size(), false);
        for (auto t : select_terminals(r.scores, selection)) raw[t] = true;
        auto closed = close_selection(db.graph, raw);
        auto count = [&](const std::vector<bool>& mask) {
            size_t tp = 0, sel = 0;
            for (size_t i = 0; i < mask.size(); ++i) {
                sel += mask[i];
                tp += mask[i] && r.labels[i];
            }
            return prf(tp, sel, pos.size());
        };
        r.at_selection_raw = count(raw);
        r.at_selection_closed = count(closed);
        examples.push_back(std::move(ex));
        out.questions.push_back(std::move(r));
    }
    out.report = sweep_metrics(examples, options);
    return out;
}

nlohmann::json to_json(const EvalReport& r) {
    auto prf_json = [](const PrfPoint& p) {
        return nlohmann::json{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
    };
    nlohmann::json j;
    j["roc_auc"] = r.roc_auc;
    j["pr_auc"] = r.pr_auc;
    j["macro_roc_auc"] = r.macro_roc_auc;
    j["operating_point"] = {{"threshold", std::isfinite(r.operating_point.threshold)
                                               ? nlohmann::json(r.operating_point.threshold)
                                               : nlohmann::json(nullptr)},
                            {"precision", r.operating_point.precision},
                            {"recall", r.operating_point.recall},
                            {"selected", r.operating_point.selected}};
    j["top_fraction"] = {{"fraction", r.top_fraction},
                         {"raw", prf_json(r.top_fraction_raw)},
                         {"closed", prf_json(r.top_fraction_closed)}};
    auto& ks = j["k_curve"] = nlohmann::json::array();
    for (auto& p : r.k_curve) ks.push_back({{"k", p.x}, {"raw", prf_json(p.raw)}, {"closed", prf_json(p.closed)}});
    auto& ts = j["threshold_curve"] = nlohmann::json::array();
    for (auto& p : r.threshold_curve) {
        ts.push_back({{"threshold", p.x}, {"raw", prf_json(p.raw)}, {"closed", prf_json(p.closed)}});
    }
    j["conventions"] = "macro = mean over questions; empty selection has precision 0 unless nothing is relevant; "
                       "F1 is 0 when precision and recall are 0";
    return j;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    auto rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
    rank = std::clamp<size_t>(rank, 1, values.size());
    return values[rank - 1];
}

BenchResult bench(const Engine& engine, const std::vector<std::pair<std::string, std::string>>& questions,
                  const Selection& selection, size_t repeats) {
    BenchResult result;
    std::map<std::string, std::vector<double>> per_db;
    for (size_t q = 0; q < questions.size(); ++q) {
        const auto& [db_id, text] = questions[q];
        const auto& db = engine.database(db_id);
        for (size_t r = 0; r < std::max<size_t>(1, repeats); ++r) {
            auto resp = engine.filter({text, db_id, selection, true});
            result.rows.push_back({db_id, db.graph.node_count(), db.schema.tables.size(), q, resp.timings});
            per_db[db_id].push_back(resp.timings.total_ms);
        }
    }
    for (auto& [db_id, times] : per_db) {
        const auto& db = engine.database(db_id);
        result.summary.push_back({db_id, db.graph.node_count(), db.schema.tables.size(), times.size(),
                                  percentile(times, 50), percentile(times, 95)});
    }
    std::sort(result.summary.begin(), result.summary.end(), [](const BenchSummary& a, const BenchSummary& b) {
        return std::tie(a.columns, a.db_id) < std::tie(b.columns, b.db_id);
    });
    return result;
}

std::string bench_rows_csv(const BenchResult& result) {
    std::string out = "db_id,columns,tables,question,context_ms,embed_ms,forward_ms,steiner_ms,total_ms\n";
    char buf[256];
    for (auto& r : result.rows) {
        std::snprintf(buf, sizeof(buf), ",%zu,%zu,%zu,%.3f,%.3f,%.3f,%.3f,%.3f\n", r.columns, r.tables,
                      r.question_index, r.timings.context_ms, r.timings.embed_ms, r.timings.forward_ms,
                      r.timings.steiner_ms, r.timings.total_ms);
        out += r.db_id + buf;
    }
    return out;
}

std::string bench_summary_csv(const BenchResult& result) {
    std::string out = "db_id,columns,tables,runs,median_ms,p95_ms\n";
    char buf[160];
    for (auto& s : result.summary) {
        std::snprintf(buf, sizeof(buf), ",%zu,%zu,%zu,%.3f,%.3f\n", s.columns, s.tables, s.runs, s.median_ms, s.p95_ms);
        out += s.db_id + buf;
    }
    return out;
}

}  // namespace schemasift
