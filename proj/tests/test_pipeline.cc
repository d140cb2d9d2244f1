#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <random>
#include <thread>

#include "schemasift/error.h"
#include "schemasift/pipeline.h"
#include "schemasift/remote_provider.h"
#include "schemasift/sql_columns.h"
#include "schemasift/synthetic.h"
#include "support/fixtures.h"

// After Eigen: resolv.h defines a _res macro that collides with Eigen parameter names.
#include "httplib.h"

namespace schemasift {
namespace {

/// Two-dimensional embeddings whose first entry is the score assigned to the column.
class ScriptedProvider final : public EmbeddingProvider {
   public:
    using ScoreFn = std::function<double(const std::string& query, const ColumnRef& column)>;
    explicit ScriptedProvider(ScoreFn fn) : fn_(std::move(fn)) {}

    size_t dim() const override { return 2; }
    std::string version() const override { return "scripted"; }
    std::vector<EmbeddingVector> embed_batch(std::span<const EmbedItem> items) override {
        std::vector<EmbeddingVector> out;
        for (auto& item : items) {
            EmbeddingVector v;
            v.values = {fn_(item.query, {item.context.table_name, item.context.column_name}), 0.0};
            out.push_back(std::move(v));
        }
        return out;
    }

   private:
    ScoreFn fn_;
};

/// No message passing; the score is the first input entry.
RerankerParams read_first_entry(size_t dim = 2) {
    auto p = init_params({dim, dim, dim, 0}, 1);
    p.head_weight = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    p.head_weight[0] = 1.0;
    p.head_bias = 0.0;
    return p;
}

std::shared_ptr<EmbeddingProvider> scripted(std::map<std::string, double> by_column, double rest = 0.0) {
    return std::make_shared<ScriptedProvider>([by_column, rest](const std::string&, const ColumnRef& c) {
        auto it = by_column.find(c.display());
        return it == by_column.end() ? rest : it->second;
    });
}

const char* kQuestion = "Count the number of courses offered in the Computer Science department";

Engine university_engine(std::shared_ptr<EmbeddingProvider> provider) {
    Engine engine(std::move(provider), read_first_entry());
    engine.add_database(testing::university_schema());
    return engine;
}

std::set<std::string> names(const FilterResponse& r) {
    std::set<std::string> out;
    for (auto& s : r.selected) out.insert(s.column.display());
    return out;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::Io;
}

TEST(Filter, CourseQuestionClosesOverTheJoin) {
    auto engine = university_engine(scripted({{"Departments.name", 0.9}, {"Courses.cid", 0.8}}, 0.1));
    auto resp = engine.filter({kQuestion, "university", Selection::top_k(2), true});
    EXPECT_EQ(names(resp), (std::set<std::string>{"Courses.cid", "Courses.dept_id", "Departments.did",
                                                  "Departments.name"}));
    for (auto& s : resp.selected) {
        bool terminal = s.column.display() == "Departments.name" || s.column.display() == "Courses.cid";
        EXPECT_EQ(s.terminal, terminal) << s.column.display();
    }
    EXPECT_EQ(resp.tables, (std::vector<std::string>{"Departments", "Courses"}));
    ASSERT_EQ(resp.foreign_keys.size(), 1u);
    EXPECT_EQ(resp.foreign_keys[0].source.display(), "Courses.dept_id");
    EXPECT_EQ(resp.scores.size(), 14u);
    EXPECT_EQ(resp.columns.size(), 14u);
    EXPECT_GE(resp.timings.total_ms, 0.0);
    EXPECT_GE(resp.timings.steiner_ms, 0.0);

    auto json = to_json(resp);
    EXPECT_EQ(json["selected"].size(), 4u);
    EXPECT_EQ(json["scores"].size(), 14u);
    EXPECT_EQ(json["foreign_keys"][0]["target"], "Departments.did");
}

TEST(Filter, WithoutClosureKeepsOnlyTerminals) {
    auto engine = university_engine(scripted({{"Departments.name", 0.9}, {"Courses.cid", 0.8}}, 0.1));
    auto resp = engine.filter({kQuestion, "university", Selection::top_k(2), false});
    EXPECT_EQ(names(resp), (std::set<std::string>{"Courses.cid", "Departments.name"}));
    EXPECT_TRUE(resp.foreign_keys.empty());
    EXPECT_EQ(resp.tables.size(), 2u);
}

TEST(Filter, FullPercentSelectsEverything) {
    auto engine = university_engine(scripted({{"Students.email", 0.5}}));
    auto resp = engine.filter({kQuestion, "university", Selection::top_percent(1.0), true});
    EXPECT_EQ(resp.selected.size(), 14u);
    EXPECT_EQ(resp.tables.size(), 4u);
    EXPECT_EQ(resp.foreign_keys.size(), 4u);
}

TEST(Filter, ThresholdMaySelectNothing) {
    auto engine = university_engine(scripted({}, 0.1));
    auto resp = engine.filter({kQuestion, "university", Selection::threshold(0.5), true});
    EXPECT_TRUE(resp.selected.empty());
    EXPECT_TRUE(resp.tables.empty());
    EXPECT_TRUE(resp.foreign_keys.empty());
}

TEST(Filter, RejectsBadRequests) {
    auto engine = university_engine(scripted({}));
    EXPECT_EQ(code_of([&] { engine.filter({kQuestion, "nowhere", Selection::top_k(2), true}); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { engine.filter({kQuestion, "university", Selection::top_k(0), true}); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { engine.filter({kQuestion, "university", Selection::top_percent(1.5), true}); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { engine.filter({kQuestion, "university", Selection::top_percent(0), true}); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { Engine(std::make_shared<HashEmbedder>(16), read_first_entry()); }),
              ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([&] {
                  Engine e(std::make_shared<HashEmbedder>(16), read_first_entry(16));
                  auto other = testing::university_schema();
                  other.tables.pop_back();
                  other.foreign_keys.resize(2);
                  e.add_database(other, build_fd_graph(testing::university_schema()));
              }),
              ErrorCode::ShapeMismatch);
}

TEST(Selection, ModesAndNames) {
    std::vector<double> s{0.1, 0.9, 0.5, 0.7, 0.3};
    EXPECT_EQ(select_terminals(s, Selection::top_k(2)), (std::vector<uint32_t>{1, 3}));
    EXPECT_EQ(select_terminals(s, Selection::top_k(9)).size(), 5u);
    EXPECT_EQ(select_terminals(s, Selection::top_percent(0.4)).size(), 2u);
    EXPECT_EQ(select_terminals(s, Selection::top_percent(0.5)).size(), 3u);
    EXPECT_EQ(select_terminals(s, Selection::threshold(0.5)), (std::vector<uint32_t>{1, 2, 3}));
    for (auto m : {Selection::Mode::top_k, Selection::Mode::top_percent, Selection::Mode::threshold}) {
        EXPECT_EQ(parse_selection_mode(to_string(m)), m);
    }
    EXPECT_THROW(parse_selection_mode("best"), Error);
    EXPECT_THROW(Selection::threshold(std::nan("")).validate(), Error);
    EXPECT_THROW((Selection{Selection::Mode::top_k, 1.5}).validate(), Error);
}

TEST(SelectionProperties, NestingDominanceAndInducedTriples) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (uint64_t seed = 1; seed <= 25; ++seed) {
        auto schema = generate_random_schema(40, seed);
        auto graph = build_fd_graph(schema);
        const size_t n = graph.node_count();
        if (n == 0) continue;
        std::vector<double> scores(n);
        for (auto& x : scores) x = std::round(u(rng) * 20) / 20;  // ties on purpose

        std::vector<bool> previous(n, false);
        for (size_t k = 1; k <= n; ++k) {
            std::vector<bool> raw(n, false);
            for (auto t : select_terminals(scores, Selection::top_k(k))) raw[t] = true;
            for (size_t i = 0; i < n; ++i) EXPECT_TRUE(!previous[i] || raw[i]) << "top-" << k << " drops " << i;
            auto closed = close_selection(graph, raw);
            for (size_t i = 0; i < n; ++i) EXPECT_TRUE(!raw[i] || closed[i]);
            previous = raw;
        }

        std::map<std::string, double> by_column;
        for (size_t i = 0; i < n; ++i) by_column[graph.nodes()[i].display()] = scores[i];
        Engine engine(scripted(by_column), read_first_entry());
        engine.add_database(schema);
        for (auto sel : {Selection::top_k(3), Selection::top_percent(0.3), Selection::threshold(0.6)}) {
            for (bool closure : {false, true}) {
                auto resp = engine.filter({"q", schema.db_id, sel, closure});
                std::set<std::string> chosen_tables;
                std::set<ColumnRef> chosen;
                for (auto& s : resp.selected) {
                    chosen.insert(s.column);
                    chosen_tables.insert(s.column.table);
                }
                std::set<std::string> listed(resp.tables.begin(), resp.tables.end());
                EXPECT_EQ(listed, chosen_tables);
                size_t expected_fks = 0;
                for (auto& fk : schema.foreign_keys) expected_fks += chosen.count(fk.source) && chosen.count(fk.target);
                EXPECT_EQ(resp.foreign_keys.size(), expected_fks);
                for (auto& fk : resp.foreign_keys) {
                    EXPECT_TRUE(chosen.count(fk.source) && chosen.count(fk.target));
                }
            }
        }
    }
}

/// Labels a planted corpus and scores columns by their gold membership.
struct PlantedFixture {
    PlantedCorpus corpus;
    std::vector<EvalQuestion> questions;
    std::map<std::pair<std::string, std::string>, double> gold;  // (question, column) -> 1

    explicit PlantedFixture(uint64_t seed) {
        PlantedOptions options;
        options.databases = 3;
        options.tables = 8;
        options.columns_per_table = 5;
        options.questions = 12;
        options.seed = seed;
        corpus = generate_planted_corpus(options);
        std::map<std::string, const DatabaseSchema*> schemas;
        for (auto& db : corpus.databases) schemas[db.schema.db_id] = &db.schema;
        for (auto& q : corpus.questions) {
            auto ex = build_labeled_example(q.question, {q.sql}, *schemas.at(q.db_id));
            for (auto& c : ex.positives) gold[{q.question, c.key()}] = 1.0;
            questions.push_back({q.db_id, std::move(ex)});
        }
    }

    std::shared_ptr<EmbeddingProvider> oracle() const {
        auto labels = gold;
        return std::make_shared<ScriptedProvider>([labels](const std::string& q, const ColumnRef& c) {
            return labels.count({q, c.key()}) ? 1.0 : 0.0;
        });
    }

    Engine engine(std::shared_ptr<EmbeddingProvider> provider, RerankerParams params) const {
        Engine e(std::move(provider), std::move(params));
        for (auto& db : corpus.databases) e.add_database(db.schema);
        return e;
    }
};

TEST(Planted, OracleScoresRecoverTheGroundTruth) {
    PlantedFixture fx(5);
    auto engine = fx.engine(fx.oracle(), read_first_entry());
    for (auto& q : fx.questions) {
        const auto& schema = engine.database(q.db_id).schema;
        const auto k = Selection::top_k(q.example.positives.size());
        ColumnSet raw, closed;
        for (auto& s : engine.filter({q.example.question, q.db_id, k, false}).selected) raw.insert(s.column);
        for (auto& s : engine.filter({q.example.question, q.db_id, k, true}).selected) closed.insert(s.column);
        EXPECT_EQ(raw, q.example.positives) << q.example.question;

        // Non-key columns of one table meet only at its primary key, so closure may add it.
        std::set<std::string> gold_tables;
        for (auto& c : q.example.positives) gold_tables.insert(c.table);
        for (auto& c : q.example.positives) EXPECT_TRUE(closed.count(c)) << c.display();
        for (auto& c : closed) {
            if (q.example.positives.count(c)) continue;
            auto* table = schema.find_table(c.table);
            ASSERT_NE(table, nullptr);
            EXPECT_TRUE(gold_tables.count(table->name)) << c.display();
            EXPECT_EQ(table->primary_key, (std::vector<std::string>{c.column})) << c.display();
        }
    }
}

TEST(Evaluate, OracleScoresArePerfect) {
    PlantedFixture fx(6);
    auto engine = fx.engine(fx.oracle(), read_first_entry());
    auto out = evaluate(engine, fx.questions, {}, Selection::top_percent(0.2));
    ASSERT_EQ(out.questions.size(), fx.questions.size());
    EXPECT_DOUBLE_EQ(out.report.roc_auc, 1.0);
    EXPECT_DOUBLE_EQ(out.report.pr_auc, 1.0);
    EXPECT_DOUBLE_EQ(out.report.macro_roc_auc, 1.0);
    for (auto& q : out.questions) {
        EXPECT_DOUBLE_EQ(q.roc_auc, 1.0);
        EXPECT_GE(q.at_selection_closed.recall, q.at_selection_raw.recall);
        size_t positives = 0;
        for (int l : q.labels) positives += l;
        EXPECT_GT(positives, 0u);
    }
    for (auto& p : out.report.k_curve) EXPECT_GE(p.closed.recall + 1e-12, p.raw.recall);
    auto json = to_json(out.report);
    EXPECT_EQ(json["k_curve"].size(), 19u);
    EXPECT_EQ(json["roc_auc"], 1.0);
}

TEST(Evaluate, TrainingExamplesPartitionNodes) {
    PlantedFixture fx(7);
    auto engine = fx.engine(fx.oracle(), read_first_entry());
    for (auto& q : fx.questions) {
        auto ex = make_training_example(engine, q);
        const auto n = engine.database(q.db_id).graph.node_count();
        EXPECT_EQ(ex.positives.size(), q.example.positives.size());
        EXPECT_EQ(ex.positives.size() + ex.negatives.size(), n);
        EXPECT_EQ(static_cast<size_t>(ex.embeddings.rows()), n);
        for (auto p : ex.positives) EXPECT_EQ(ex.embeddings(p, 0), 1.0);
        for (auto p : ex.negatives) EXPECT_EQ(ex.embeddings(p, 0), 0.0);
    }
}

TEST(Engine, ParallelScoringMatchesSerial) {
    auto wide = generate_wide_database(12, 300, 2);
    std::vector<double> reference;
    for (size_t jobs : {1, 4}) {
        auto provider = std::make_shared<HashEmbedder>(32);
        Engine engine(provider, init_params({32, 16, 8, 2}, 9), {}, jobs);
        engine.add_database(wide.schema, std::nullopt, build_value_index(wide.schema, wide.cells));
        auto scores = engine.score_columns(wide.schema.db_id, "total amount per region");
        if (reference.empty()) {
            reference = scores;
        } else {
            EXPECT_EQ(scores, reference);
        }
    }
    EXPECT_EQ(reference.size(), 300u);
}

/// Serves precomputed hash embeddings keyed by the rendered prompt.
TEST(Engine, RemoteStubWithSameVectorsGivesSameRanking) {
    auto schema = testing::university_schema();
    HashEmbedder local(24);
    std::map<std::string, std::vector<double>> by_document;
    const std::vector<std::string> questions{kQuestion, "email of students in each department"};
    for (auto& q : questions) {
        for (auto& t : schema.tables) {
            for (auto& c : t.columns) {
                auto ctx = assemble_context(schema, {t.name, c.name}, q, nullptr, {});
                by_document[render_prompt(q, ctx)] = hash_embed(q, ctx, 24).values;
            }
        }
    }
    httplib::Server server;
    server.Post("/v1", [&](const httplib::Request& req, httplib::Response& res) {
        auto request = nlohmann::json::parse(req.body);
        nlohmann::json results = nlohmann::json::array();
        for (auto& item : request["items"]) results.push_back({{"embedding", by_document.at(item["document"])}});
        res.set_content(nlohmann::json{{"model_version", "stub"}, {"results", results}}.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteConfig config;
    config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    config.dim = 24;
    config.max_batch = 5;
    auto params = init_params({24, 8, 8, 2}, 4);
    Engine hashed(std::make_shared<HashEmbedder>(24), params);
    Engine remote(std::make_shared<RemoteProvider>(config), params);
    hashed.add_database(schema);
    remote.add_database(schema);
    for (auto& q : questions) {
        auto a = hashed.filter({q, "university", Selection::top_k(3), true});
        auto b = remote.filter({q, "university", Selection::top_k(3), true});
        EXPECT_EQ(a.scores, b.scores);
        EXPECT_EQ(names(a), names(b));
    }
    server.stop();
    thread.join();
}

TEST(Bench, EmptyQuestionSetGivesEmptyTables) {
    auto engine = university_engine(scripted({}));
    auto result = bench(engine, {}, Selection::top_k(2));
    EXPECT_TRUE(result.rows.empty());
    EXPECT_TRUE(result.summary.empty());
    EXPECT_EQ(bench_rows_csv(result), "db_id,columns,tables,question,context_ms,embed_ms,forward_ms,steiner_ms,total_ms\n");
    EXPECT_EQ(bench_summary_csv(result), "db_id,columns,tables,runs,median_ms,p95_ms\n");
}

TEST(Bench, RowsPerRepeatAndSummaryOrder) {
    Engine engine(scripted({}), read_first_entry());
    engine.add_database(testing::university_schema());
    auto small = generate_random_schema(6, 3);
    small.db_id = "small";
    engine.add_database(small);
    auto result = bench(engine, {{"university", "a"}, {"small", "b"}, {"university", "c"}}, Selection::top_k(2), 3);
    EXPECT_EQ(result.rows.size(), 9u);
    ASSERT_EQ(result.summary.size(), 2u);
    EXPECT_EQ(result.summary[0].db_id, "small");
    EXPECT_EQ(result.summary[1].runs, 6u);
    EXPECT_EQ(result.summary[1].columns, 14u);
    EXPECT_LE(result.summary[1].median_ms, result.summary[1].p95_ms);
    EXPECT_EQ(result.rows[2].question_index, 0u);
    EXPECT_EQ(result.rows[3].db_id, "small");
}

TEST(Bench, NearestRankPercentile) {
    EXPECT_EQ(percentile({}, 50), 0.0);
    EXPECT_EQ(percentile({5}, 95), 5.0);
    EXPECT_EQ(percentile({4, 1, 3, 2}, 50), 2.0);
    EXPECT_EQ(percentile({4, 1, 3, 2}, 95), 4.0);
    EXPECT_EQ(percentile({4, 1, 3, 2}, 0), 1.0);
    std::vector<double> hundred;
    for (int i = 100; i >= 1; --i) hundred.push_back(i);
    EXPECT_EQ(percentile(hundred, 95), 95.0);
}

}  // namespace
}  // namespace schemasift
