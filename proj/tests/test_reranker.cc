#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "schemasift/binary_io.h"
#include "schemasift/error.h"
#include "schemasift/reranker.h"
#include "support/fixtures.h"
#include "support/oracles.h"

namespace schemasift {
namespace {

constexpr size_t kFk = static_cast<size_t>(EdgeType::foreign_key);
constexpr size_t kC2pk = static_cast<size_t>(EdgeType::column_to_primary_key);

FdGraph three_node_graph() {
    return FdGraph("tiny", {{"A", "u1"}, {"A", "u2"}, {"B", "v"}}, {0, 0, 1}, {0, 0, kPrimaryKey},
                   {{0, 2, EdgeType::foreign_key}, {1, 2, EdgeType::column_to_primary_key}});
}

RowMatrix mat2(double a, double b, double c, double d) {
    RowMatrix m(2, 2);
    m << a, b, c, d;
    return m;
}

RerankerParams zero_params(RerankerShape shape) { return init_params(shape, 0).zeros_like(); }

RerankerParams three_node_params() {
    auto p = zero_params({2, 2, 2, 1});
    auto& layer = p.layers[0];
    layer.self = mat2(1, 0.5, 0, 1);
    layer.value[kFk] = mat2(0, 1, 1, 0);
    layer.query[kFk] = mat2(1, 0, 0, 1);
    layer.key[kFk] = mat2(1, 0, 0, 1);
    layer.value[kC2pk] = mat2(2, 0, 0, 2);
    layer.query[kC2pk] = mat2(0, 1, 1, 0);
    layer.key[kC2pk] = mat2(1, 1, 0, 0);
    p.head_weight = Eigen::Vector2d(1, -1);
    p.head_bias = 0.5;
    return p;
}

RowMatrix three_node_inputs() {
    RowMatrix h(3, 2);
    h << 1, 0, 0, 1, 1, 2;
    return h;
}

TEST(RerankerForward, HandComputedThreeNodeFixture) {
    auto graph = three_node_graph();
    GraphPlan plan(graph);
    auto params = three_node_params();
    ForwardCache cache;
    auto out = forward(plan, three_node_inputs(), params, &cache);
    auto s = score(out, params);

    // Node v receives one edge of each relation; its attention over the foreign-key edge:
    ASSERT_EQ(cache.layers[0].attention.size(), 2u);
    EXPECT_NEAR(cache.layers[0].attention[0], 0.33023845067334306, 1e-12);
    EXPECT_NEAR(cache.layers[0].attention[1], 1 - 0.33023845067334306, 1e-12);

    EXPECT_NEAR(out(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(out(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(out(1, 0), 0.5, 1e-12);
    EXPECT_NEAR(out(1, 1), 1.0, 1e-12);
    EXPECT_NEAR(out(2, 0), 2.0, 1e-12);
    EXPECT_NEAR(out(2, 1), 3.669761549326657, 1e-12);

    EXPECT_NEAR(s[0], 1.5, 1e-12);
    EXPECT_NEAR(s[1], 0.0, 1e-12);
    EXPECT_NEAR(s[2], -1.1697615493266569, 1e-12);
}

TEST(RerankerForward, ScoresMatchDirectMatrixRecomputation) {
    auto params = three_node_params();
    auto h = three_node_inputs();
    auto& layer = params.layers[0];
    Eigen::Vector2d hv = h.row(2).transpose();
    Eigen::Vector2d hu1 = h.row(0).transpose();
    Eigen::Vector2d hu2 = h.row(1).transpose();
    const double e1 = (layer.query[kFk] * hv).dot(layer.key[kFk] * hu1) / std::sqrt(2.0);
    const double e2 = (layer.query[kC2pk] * hv).dot(layer.key[kC2pk] * hu2) / std::sqrt(2.0);
    const double a1 = std::exp(e1) / (std::exp(e1) + std::exp(e2));
    Eigen::Vector2d expected_v = layer.self * hv + a1 * (layer.value[kFk] * hu1) + (1 - a1) * (layer.value[kC2pk] * hu2);

    GraphPlan plan(three_node_graph());
    auto out = forward(plan, h, params);
    EXPECT_NEAR(out(2, 0), expected_v[0], 1e-12);
    EXPECT_NEAR(out(2, 1), expected_v[1], 1e-12);
    EXPECT_NEAR(score(out, params)[2], params.head_weight.dot(expected_v) + params.head_bias, 1e-12);
}

TEST(RerankerForward, IsolatedNodeKeepsOnlySelfTerm) {
    FdGraph g("iso", {{"T", "a"}}, {0}, {0}, {});
    GraphPlan plan(g);
    auto params = init_params({3, 3, 3, 1}, 5);
    RowMatrix h(1, 3);
    h << 0.3, -1.2, 2.0;
    auto out = forward(plan, h, params);
    RowMatrix expected = h * params.layers[0].self.transpose();
    EXPECT_TRUE(out.isApprox(expected, 1e-14));
}

TEST(RerankerForward, ZeroLayersIgnoreEdges) {
    auto params = init_params({4, 3, 3, 0}, 9);
    ASSERT_TRUE(params.has_input_projection());
    auto g = testing::random_graph(3, 6, 12);
    FdGraph bare("bare", g.nodes(), std::vector<uint32_t>(6, 0), std::vector<uint8_t>(6, 0), {});
    RowMatrix h = RowMatrix::Random(6, 4);
    auto with_edges = forward(GraphPlan(g), h, params);
    auto without = forward(GraphPlan(bare), h, params);
    EXPECT_TRUE(with_edges.isApprox(without, 0));
    EXPECT_TRUE(with_edges.isApprox(h * params.input_projection.transpose(), 1e-14));
}

TEST(RerankerForward, AttentionOverInEdgesSumsToOne) {
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        auto g = testing::random_graph(seed, 12, 40);
        GraphPlan plan(g);
        auto params = init_params({5, 5, 4, 2}, seed);
        RowMatrix h = RowMatrix::Random(12, 5);
        ForwardCache cache;
        forward(plan, h, params, &cache);
        for (auto& layer : cache.layers) {
            for (size_t v = 0; v < plan.node_count; ++v) {
                if (plan.offsets[v] == plan.offsets[v + 1]) continue;
                double total = 0;
                for (auto e = plan.offsets[v]; e < plan.offsets[v + 1]; ++e) {
                    EXPECT_GE(layer.attention[e], 0.0);
                    total += layer.attention[e];
                }
                EXPECT_NEAR(total, 1.0, 1e-12) << "seed " << seed << " node " << v;
            }
        }
    }
}

TEST(RerankerForward, PermutationEquivariant) {
    std::mt19937_64 rng(11);
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        const size_t n = 10;
        auto g = testing::random_graph(seed, n, 30);
        std::vector<uint32_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0u);
        std::shuffle(perm.begin(), perm.end(), rng);
        auto pg = g.permuted(perm);
        auto params = init_params({4, 4, 4, 2}, seed);
        RowMatrix h = RowMatrix::Random(n, 4);
        RowMatrix ph(n, 4);
        for (size_t i = 0; i < n; ++i) ph.row(perm[i]) = h.row(i);
        auto s = score(forward(GraphPlan(g), h, params), params);
        auto ps = score(forward(GraphPlan(pg), ph, params), params);
        for (size_t i = 0; i < n; ++i) EXPECT_NEAR(s[i], ps[perm[i]], 1e-12);
    }
}

TEST(RerankerForward, BiasShiftPreservesRanking) {
    auto g = testing::random_graph(4, 15, 40);
    GraphPlan plan(g);
    auto params = init_params({6, 6, 6, 2}, 4);
    RowMatrix h = RowMatrix::Random(15, 6);
    auto out = forward(plan, h, params);
    auto before = score(out, params);
    params.head_bias += 3.25;
    auto after = score(out, params);
    for (Eigen::Index i = 0; i < before.size(); ++i) {
        EXPECT_NEAR(after[i] - before[i], 3.25, 1e-12);
        for (Eigen::Index j = 0; j < before.size(); ++j) EXPECT_EQ(before[i] < before[j], after[i] < after[j]);
    }
}

TEST(RerankerHead, ZeroWeightGivesBias) {
    auto params = zero_params({3, 3, 3, 0});
    params.head_bias = 3.0;
    RowMatrix h = RowMatrix::Random(4, 3);
    auto s = score(h, params);
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_EQ(s[i], 3.0);
}

TEST(RerankerHead, OneDimensional) {
    auto params = zero_params({1, 1, 1, 0});
    params.head_weight[0] = 2.0;
    RowMatrix h(1, 1);
    h << 5.0;
    EXPECT_EQ(score(h, params)[0], 10.0);
}

TEST(RerankerForward, RejectsWrongEmbeddingWidth) {
    GraphPlan plan(three_node_graph());
    auto params = three_node_params();
    RowMatrix h = RowMatrix::Zero(3, 5);
    EXPECT_THROW(forward(plan, h, params), Error);
    RowMatrix short_rows = RowMatrix::Zero(2, 2);
    EXPECT_THROW(forward(plan, short_rows, params), Error);
}

TEST(RerankerForward, NonFiniteInputRaisesNumericFailure) {
    GraphPlan plan(three_node_graph());
    auto params = three_node_params();
    auto h = three_node_inputs();
    h(1, 0) = std::nan("");
    try {
        forward(plan, h, params);
        FAIL() << "expected NumericFailure";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NumericFailure);
    }
}

TEST(RerankerLoss, MarginExamples) {
    std::vector<double> s{5, 1};
    std::vector<uint32_t> pos{0}, neg{1};
    EXPECT_EQ(margin_loss(s, pos, neg, 1.0), 0.0);
    std::vector<double> tied{1, 1};
    EXPECT_NEAR(margin_loss(tied, pos, neg, 0.5), 0.5, 1e-15);
}

TEST(RerankerLoss, MarginMatchesOracle) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(7);
        for (auto& x : s) x = u(rng);
        std::vector<uint32_t> pos{0, 1, 2}, neg{3, 4, 5, 6};
        const double margin = 0.1 + std::abs(u(rng));
        EXPECT_NEAR(margin_loss(s, pos, neg, margin), testing::margin_loss_oracle(s, pos, neg, margin), 1e-10);
    }
}

TEST(RerankerLoss, MarginRejectsEmptySets) {
    std::vector<double> s{1, 2};
    std::vector<uint32_t> one{0}, none;
    EXPECT_THROW(margin_loss(s, none, one, 1.0), Error);
    EXPECT_THROW(margin_loss(s, one, none, 1.0), Error);
}

TEST(RerankerLoss, InfoNceUniformGroupIsLogOfSize) {
    std::vector<double> neg(7, 0.37);
    EXPECT_NEAR(infonce_loss(0.37, neg), std::log(8.0), 1e-12);
}

TEST(RerankerLoss, InfoNceDominantPositiveNearZero) {
    std::vector<double> neg(7, -10.0);
    EXPECT_LT(infonce_loss(40.0, neg), 1e-20);
    EXPECT_GE(infonce_loss(40.0, neg), 0.0);
}

TEST(RerankerLoss, InfoNceMatchesOracle) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> neg(7);
        for (auto& x : neg) x = u(rng);
        double pos = u(rng);
        EXPECT_NEAR(infonce_loss(pos, neg), testing::infonce_oracle(pos, neg), 1e-10);
    }
}

TEST(RerankerGradient, ScalarClosedForm) {
    // u -> v over one foreign-key edge, d = 1. With a single in-edge the attention is 1, so
    // the query and key matrices receive no gradient.
    FdGraph g("pair", {{"T", "u"}, {"T", "v"}}, {0, 0}, {0, 0}, {{0, 1, EdgeType::foreign_key}});
    GraphPlan plan(g);
    auto p = zero_params({1, 1, 1, 1});
    p.layers[0].self(0, 0) = 0.7;
    p.layers[0].value[kFk](0, 0) = 1.3;
    p.layers[0].query[kFk](0, 0) = 0.4;
    p.layers[0].key[kFk](0, 0) = -0.6;
    p.head_weight[0] = 0.9;
    p.head_bias = 0.1;
    RowMatrix h(2, 1);
    h << 2.0, -1.0;
    std::vector<LossInstance> batch{{&plan, &h, {{1, 0}}}};
    RerankerParams grad;
    const double loss = loss_and_gradient(p, batch, 5.0, &grad);

    const double s = 0.7, w_fk = 1.3, w = 0.9, hu = 2.0, hv = -1.0;
    const double score_v = w * (s * hv + w_fk * hu) + 0.1;
    const double score_u = w * s * hu + 0.1;
    EXPECT_NEAR(loss, 5.0 - score_v + score_u, 1e-12);
    EXPECT_NEAR(grad.head_weight[0], -(s * hv + w_fk * hu) + s * hu, 1e-12);
    EXPECT_NEAR(grad.layers[0].self(0, 0), -w * hv + w * hu, 1e-12);
    EXPECT_NEAR(grad.layers[0].value[kFk](0, 0), -w * hu, 1e-12);
    EXPECT_EQ(grad.head_bias, 0.0);
    EXPECT_NEAR(grad.layers[0].query[kFk](0, 0), 0.0, 1e-15);
    EXPECT_NEAR(grad.layers[0].key[kFk](0, 0), 0.0, 1e-15);
}

TEST(RerankerGradient, SatisfiedMarginGivesZeroGradient) {
    GraphPlan plan(three_node_graph());
    auto params = three_node_params();
    auto h = three_node_inputs();
    // Scores are 1.5 (u1) and -1.17 (v); a margin of 1 is already met.
    std::vector<LossInstance> batch{{&plan, &h, {{0, 2}}}};
    RerankerParams grad;
    EXPECT_EQ(loss_and_gradient(params, batch, 1.0, &grad), 0.0);
    EXPECT_TRUE(grad == params.zeros_like());
}

TEST(RerankerGradient, FiniteDifferenceAgreement) {
    for (uint64_t seed : {1, 2, 3, 4, 5}) {
        auto outcome = testing::gradient_check(seed);
        EXPECT_GT(outcome.parameters_checked, 0u);
        EXPECT_LT(outcome.max_relative_error, 1e-4) << "seed " << seed << " worst " << outcome.worst_parameter;
    }
}

std::vector<TrainingExample> separable_examples(const GraphPlan& plan, size_t n, size_t count) {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> noise(0, 0.1);
    std::vector<TrainingExample> out;
    for (size_t q = 0; q < count; ++q) {
        TrainingExample ex{&plan, RowMatrix(n, 4), {}, {}};
        for (uint32_t v = 0; v < n; ++v) {
            const bool positive = (v + q) % 3 == 0;
            ex.embeddings.row(v) << (positive ? 1.0 : -1.0) + noise(rng), noise(rng), noise(rng), 0.5;
            (positive ? ex.positives : ex.negatives).push_back(v);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

TrainingConfig small_config() {
    TrainingConfig cfg;
    cfg.num_layers = 1;
    cfg.hidden_dim = 4;
    cfg.learning_rate = 0.05;
    cfg.epochs = 40;
    cfg.batch_size = 4;
    cfg.seed = 3;
    return cfg;
}

TEST(RerankerTraining, ZeroEpochsReturnsInitialization) {
    FdGraph g("chain", {{"T", "a"}, {"T", "b"}, {"T", "c"}}, {0, 0, 0}, {0, 0, 0}, {});
    GraphPlan plan(g);
    auto examples = separable_examples(plan, 3, 4);
    auto cfg = small_config();
    cfg.epochs = 0;
    auto result = train(examples, cfg, 4);
    auto init = init_params({4, 4, 4, 1}, cfg.seed);
    init.quantize();
    EXPECT_TRUE(result.params == init);
    EXPECT_TRUE(result.trace.empty());
}

TEST(RerankerTraining, LossFallsOnSeparableData) {
    auto g = testing::random_graph(5, 9, 10);
    GraphPlan plan(g);
    auto examples = separable_examples(plan, 9, 24);
    auto result = train(examples, small_config(), 4);
    ASSERT_EQ(result.epoch_loss.size(), 40u);
    EXPECT_LT(result.epoch_loss.back(), 0.01 * result.epoch_loss.front());
}

TEST(RerankerTraining, SameSeedSameBytes) {
    auto g = testing::random_graph(6, 9, 10);
    GraphPlan plan(g);
    auto examples = separable_examples(plan, 9, 12);
    auto cfg = small_config();
    cfg.epochs = 5;
    auto a = train(examples, cfg, 4);
    auto b = train(examples, cfg, 4);
    EXPECT_EQ(serialize_params(a.params), serialize_params(b.params));
    EXPECT_EQ(format_loss_trace(a.trace), format_loss_trace(b.trace));
    cfg.seed = 4;
    auto c = train(examples, cfg, 4);
    EXPECT_NE(serialize_params(a.params), serialize_params(c.params));
}

TEST(RerankerTraining, DivergenceAborts) {
    auto g = testing::random_graph(7, 9, 20);
    GraphPlan plan(g);
    auto examples = separable_examples(plan, 9, 12);
    auto cfg = small_config();
    cfg.learning_rate = 50.0;
    try {
        train(examples, cfg, 4);
        FAIL() << "expected divergence";
    } catch (const Error& e) {
        EXPECT_TRUE(e.code() == ErrorCode::Divergence || e.code() == ErrorCode::NumericFailure);
    }
}

TEST(RerankerIo, RoundTripIsExact) {
    auto params = init_params({5, 3, 2, 2}, 77);
    params.head_bias = -0.125;
    params.quantize();
    auto bytes = serialize_params(params);
    auto back = load_params(bytes);
    EXPECT_TRUE(back == params);
    EXPECT_EQ(serialize_params(back), bytes);

    auto path = testing::scratch_dir("reranker_io") / "w.bin";
    save_params(params, path);
    EXPECT_TRUE(load_params_file(path) == params);
}

TEST(RerankerIo, TruncatedFileIsCorruption) {
    auto bytes = serialize_params(init_params({3, 3, 3, 1}, 1));
    for (size_t cut : {size_t{0}, size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
        try {
            load_params(std::string_view(bytes).substr(0, cut));
            FAIL() << "cut at " << cut;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::Corruption);
        }
    }
}

TEST(RerankerIo, FlippedByteIsCorruption) {
    auto bytes = serialize_params(init_params({3, 3, 3, 1}, 1));
    bytes[bytes.size() / 2] ^= 0x40;
    EXPECT_THROW(load_params(bytes), Error);
}

void put_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>(v >> (8 * i) & 0xff));
}

TEST(RerankerIo, LittleEndianLayoutFixture) {
    auto params = zero_params({1, 1, 1, 0});
    params.head_weight[0] = 1.5;
    params.head_bias = -0.25;

    std::string head;
    put_u32(head, 0);  // layers
    put_u32(head, 1);  // hidden
    put_u32(head, 1);  // key
    put_u32(head, 1);  // input
    head.push_back(0);
    put_u32(head, 6);
    for (const char* name : {"foreign_key", "column_to_foreign_key", "column_to_primary_key", "rev_foreign_key",
                             "rev_column_to_foreign_key", "rev_column_to_primary_key"}) {
        put_u32(head, static_cast<uint32_t>(std::strlen(name)));
        head += name;
    }
    const std::string parm("\x00\x00\xc0\x3f\x00\x00\x80\xbe", 8);

    std::string expected = "SSRERANK";
    expected += std::string("\x01\x00\x00\x00\x02\x00\x00\x00", 8);
    expected += "HEAD";
    expected += std::string(1, static_cast<char>(head.size()));
    expected += std::string(7, '\0');
    expected += head;
    expected += "PARM";
    expected += std::string("\x08\x00\x00\x00\x00\x00\x00\x00", 8);
    expected += parm;
    put_u32(expected, crc32(expected));

    EXPECT_EQ(serialize_params(params), expected);
    auto back = load_params(expected);
    EXPECT_EQ(back.head_weight[0], 1.5);
    EXPECT_EQ(back.head_bias, -0.25);
}

TEST(RerankerIo, HeaderBodyMismatchIsShapeMismatch) {
    auto bytes = serialize_params(init_params({2, 2, 2, 1}, 1));
    auto c = Container::decode(bytes, "SSRERANK", 1);
    c.sections["PARM"].resize(c.sections["PARM"].size() - 4);
    try {
        load_params(c.encode());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
    }
}

TEST(RerankerIo, LossTraceFormat) {
    std::vector<StepRecord> trace{{0, 0, 1.5}, {1, 7, 0.25}};
    EXPECT_EQ(format_loss_trace(trace), "epoch,step,loss\n0,0,1.5\n1,7,0.25\n");
}

}  // namespace
}  // namespace schemasift
