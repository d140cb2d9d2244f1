#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "schemasift/fd_graph.h"

namespace schemasift {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RerankerShape {
    size_t input_dim = 0;   // provider embedding width
    size_t hidden_dim = 0;  // d
    size_t key_dim = 0;     // d_k of the attention projections
    size_t num_layers = 0;  // L

    friend bool operator==(const RerankerShape&, const RerankerShape&) = default;
};

struct LayerParams {
    RowMatrix self;                                 // d x d
    std::array<RowMatrix, kNumEdgeTypes> value;     // d x d, one per relation
    std::array<RowMatrix, kNumEdgeTypes> query;     // d_k x d
    std::array<RowMatrix, kNumEdgeTypes> key;       // d_k x d
};

/// Every trainable tensor of the relation-aware graph transformer and its scoring head.
/// The input projection exists only when the provider width differs from the hidden width.
struct RerankerParams {
    RerankerShape shape;
    RowMatrix input_projection;  // d x input_dim, or empty
    std::vector<LayerParams> layers;
    Eigen::VectorXd head_weight;  // d
    double head_bias = 0.0;

    bool has_input_projection() const { return input_projection.size() > 0; }

    /// Visits every tensor in serialization order. The head bias is a 1x1 view.
    void for_each_tensor(const std::function<void(const std::string& name, Eigen::Map<Eigen::VectorXd>)>& fn);
    size_t parameter_count() const;

    /// Rounds every value to the nearest 32-bit float, the precision of the weights file.
    void quantize();

    /// Same shape, all zeros.
    RerankerParams zeros_like() const;

    friend bool operator==(const RerankerParams& a, const RerankerParams& b);
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights from a seeded generator; zero head bias.
/// key_dim == 0 means key_dim = hidden_dim.
RerankerParams init_params(RerankerShape shape, uint64_t seed);

/// Incoming edges grouped by target, with per-relation gathers precomputed. Build once per graph.
struct GraphPlan {
    struct RelationRows {
        std::vector<uint32_t> sources;  // nodes with an outgoing edge of this relation
        std::vector<uint32_t> targets;  // nodes with an incoming edge of this relation
    };
    struct InEdge {
        uint8_t relation;
        uint32_t source_row;  // row in RelationRows::sources
        uint32_t target_row;  // row in RelationRows::targets
    };

    size_t node_count = 0;
    std::array<RelationRows, kNumEdgeTypes> relations;
    std::vector<uint32_t> offsets;  // node_count + 1, CSR over in_edges
    std::vector<InEdge> in_edges;

    explicit GraphPlan(const FdGraph& graph);
};

/// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardCache {
    struct Layer {
        RowMatrix input;                                      // N x d
        std::array<RowMatrix, kNumEdgeTypes> queries;         // |targets_r| x d_k
        std::array<RowMatrix, kNumEdgeTypes> keys;            // |sources_r| x d_k
        std::array<RowMatrix, kNumEdgeTypes> messages;        // |sources_r| x d
        std::vector<double> attention;                        // per in_edge, CSR order
    };
    RowMatrix embeddings;  // N x input_dim
    std::vector<Layer> layers;
    RowMatrix output;      // N x d
};

/// Relation-aware attention layers:
///
///   h'_v = W_self h_v + sum over in-edges (u, v, r) of a_r(u, v) W_r h_u
///   a(u, v) = softmax over all in-edges of v of (Q_r h_v . K_r h_u) / sqrt(d_k)
///
/// The softmax runs jointly over every incoming edge of v regardless of relation. A node with no
/// incoming edges keeps only its self term. With zero layers the output is the projected input.
/// `embeddings` is N x input_dim in node order. Throws DimensionMismatch on shape errors and
/// NumericFailure (naming layer and node) if a non-finite value appears.
RowMatrix forward(const GraphPlan& plan, const RowMatrix& embeddings, const RerankerParams& params,
                  ForwardCache* cache = nullptr);

/// Linear head: w . h_v + b for every row.
Eigen::VectorXd score(const RowMatrix& hidden, const RerankerParams& params);

/// Sum over every (positive, negative) pair of max(0, margin - s_pos + s_neg).
double margin_loss(std::span<const double> scores, std::span<const uint32_t> positives,
                   std::span<const uint32_t> negatives, double margin);

struct ScorePair {
    uint32_t positive;
    uint32_t negative;
};

double margin_loss_pairs(std::span<const double> scores, std::span<const ScorePair> pairs, double margin);

/// -log(exp(pos) / (exp(pos) + sum exp(neg))), evaluated with max subtraction.
double infonce_loss(double positive_score, std::span<const double> negative_scores);

/// One question over one graph with its sampled (positive, negative) pairs.
struct LossInstance {
    const GraphPlan* plan;
    const RowMatrix* embeddings;
    std::vector<ScorePair> pairs;
};

/// Mean over instances of the pairwise hinge loss. When `grad` is non-null it receives the
/// analytic gradient of that mean with respect to every parameter (same shape as `params`).
double loss_and_gradient(const RerankerParams& params, std::span<const LossInstance> batch, double margin,
                         RerankerParams* grad);

struct TrainingConfig {
    double margin = 1.0;
    double learning_rate = 5e-5;
    size_t epochs = 40;
    size_t batch_size = 32;
    size_t negatives_per_positive = 7;
    uint64_t seed = 0;
    size_t num_layers = 3;
    size_t hidden_dim = 256;
    size_t key_dim = 0;  // 0: same as hidden_dim
    double divergence_factor = 10.0;
};

struct TrainingExample {
    const GraphPlan* plan;
    RowMatrix embeddings;
    std::vector<uint32_t> positives;
    std::vector<uint32_t> negatives;
};

struct StepRecord {
    size_t epoch;
    size_t step;
    double loss;
};

struct TrainingResult {
    RerankerParams params;
    std::vector<StepRecord> trace;
    std::vector<double> epoch_loss;
};

/// Plain SGD on the margin loss. Each step samples min(negatives_per_positive, |negatives|)
/// distinct negatives per positive. Shuffling and sampling draw from one generator seeded by
/// `config.seed`, and parameters are kept at 32-bit precision, so equal seeds give identical
/// bytes. Aborts with Divergence when an epoch's mean loss exceeds `divergence_factor` times the
/// first epoch's.
TrainingResult train(std::span<const TrainingExample> examples, const TrainingConfig& config, size_t input_dim);
/// Continues from given parameters instead of a fresh initialization.
TrainingResult train_from(RerankerParams initial, std::span<const TrainingExample> examples,
                          const TrainingConfig& config);

/// Weights file: little-endian float32, row-major, with a header naming L, d, d_k, the relation
/// list and the provider width.
std::string serialize_params(const RerankerParams& params);
RerankerParams load_params(std::string_view bytes);
void save_params(const RerankerParams& params, const std::filesystem::path& path);
RerankerParams load_params_file(const std::filesystem::path& path);

/// "epoch,step,loss" lines with a header row.
std::string format_loss_trace(std::span<const StepRecord> trace);

}  // namespace schemasift
