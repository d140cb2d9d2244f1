#include "schemasift/reranker.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "schemasift/binary_io.h"
#include "schemasift/error.h"

namespace schemasift {

namespace {

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n) by rejection; avoids implementation-defined distributions.
uint64_t uniform_index(std::mt19937_64& rng, uint64_t n) {
    const uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
    uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

void fill_uniform(RowMatrix& m, size_t rows, size_t cols, std::mt19937_64& rng) {
    m.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * unit_uniform(rng) - 1.0) * bound;
}

RowMatrix gather_rows(const RowMatrix& m, const std::vector<uint32_t>& rows) {
    RowMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

void scatter_add_rows(RowMatrix& dst, const RowMatrix& src, const std::vector<uint32_t>& rows) {
    for (size_t i = 0; i < rows.size(); ++i) dst.row(rows[i]) += src.row(static_cast<Eigen::Index>(i));
}

const char* relation_name(size_t r) { return to_string(kAllEdgeTypes[r]); }

}  // namespace

void RerankerParams::for_each_tensor(
    const std::function<void(const std::string&, Eigen::Map<Eigen::VectorXd>)>& fn) {
    auto visit = [&](const std::string& name, RowMatrix& m) {
        fn(name, Eigen::Map<Eigen::VectorXd>(m.data(), m.size()));
    };
    if (has_input_projection()) visit("input_projection", input_projection);
    for (size_t l = 0; l < layers.size(); ++l) {
        auto prefix = "layer" + std::to_string(l) + ".";
        visit(prefix + "self", layers[l].self);
        for (size_t r = 0; r < kNumEdgeTypes; ++r) {
            visit(prefix + relation_name(r) + ".value", layers[l].value[r]);
            visit(prefix + relation_name(r) + ".query", layers[l].query[r]);
            visit(prefix + relation_name(r) + ".key", layers[l].key[r]);
        }
    }
    fn("head.weight", Eigen::Map<Eigen::VectorXd>(head_weight.data(), head_weight.size()));
    fn("head.bias", Eigen::Map<Eigen::VectorXd>(&head_bias, 1));
}

size_t RerankerParams::parameter_count() const {
    size_t n = 0;
    const_cast<RerankerParams*>(this)->for_each_tensor(
        [&](const std::string&, Eigen::Map<Eigen::VectorXd> t) { n += static_cast<size_t>(t.size()); });
    return n;
}

void RerankerParams::quantize() {
    for_each_tensor([](const std::string&, Eigen::Map<Eigen::VectorXd> t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = static_cast<double>(static_cast<float>(t[i]));
    });
}

RerankerParams RerankerParams::zeros_like() const {
    RerankerParams z = *this;
    z.for_each_tensor([](const std::string&, Eigen::Map<Eigen::VectorXd> t) { t.setZero(); });
    return z;
}

bool operator==(const RerankerParams& a, const RerankerParams& b) {
    if (!(a.shape == b.shape) || a.layers.size() != b.layers.size()) return false;
    if (a.input_projection != b.input_projection || a.head_weight != b.head_weight || a.head_bias != b.head_bias) {
        return false;
    }
    for (size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].self != b.layers[l].self) return false;
        for (size_t r = 0; r < kNumEdgeTypes; ++r) {
            if (a.layers[l].value[r] != b.layers[l].value[r] || a.layers[l].query[r] != b.layers[l].query[r] ||
                a.layers[l].key[r] != b.layers[l].key[r]) {
                return false;
            }
        }
    }
    return true;
}

RerankerParams init_params(RerankerShape shape, uint64_t seed) {
    if (shape.key_dim == 0) shape.key_dim = shape.hidden_dim;
    if (shape.input_dim == 0 || shape.hidden_dim == 0) {
        throw Error(ErrorCode::InvalidArgument, "reranker dimensions must be positive");
    }
    std::mt19937_64 rng(seed);
    RerankerParams p;
    p.shape = shape;
    const size_t d = shape.hidden_dim, dk = shape.key_dim;
    if (shape.input_dim != d) fill_uniform(p.input_projection, d, shape.input_dim, rng);
    p.layers.resize(shape.num_layers);
    for (auto& layer : p.layers) {
        fill_uniform(layer.self, d, d, rng);
        for (size_t r = 0; r < kNumEdgeTypes; ++r) {
            fill_uniform(layer.value[r], d, d, rng);
            fill_uniform(layer.query[r], dk, d, rng);
            fill_uniform(layer.key[r], dk, d, rng);
        }
    }
    RowMatrix head;
    fill_uniform(head, 1, d, rng);
    p.head_weight = head.row(0).transpose();
    p.head_bias = 0.0;
    return p;
}

GraphPlan::GraphPlan(const FdGraph& graph) : node_count(graph.node_count()) {
    // Row of each node within each relation's source / target gather.
    std::array<std::vector<int64_t>, kNumEdgeTypes> src_row, tgt_row;
    for (auto& v : src_row) v.assign(node_count, -1);
    for (auto& v : tgt_row) v.assign(node_count, -1);
    std::vector<uint32_t> in_degree(node_count, 0);
    for (auto& e : graph.edges()) {
        auto r = static_cast<size_t>(e.type);
        if (src_row[r][e.source] < 0) {
            src_row[r][e.source] = static_cast<int64_t>(relations[r].sources.size());
            relations[r].sources.push_back(e.source);
        }
        if (tgt_row[r][e.target] < 0) {
            tgt_row[r][e.target] = static_cast<int64_t>(relations[r].targets.size());
            relations[r].targets.push_back(e.target);
        }
        ++in_degree[e.target];
    }
    offsets.assign(node_count + 1, 0);
    for (size_t v = 0; v < node_count; ++v) offsets[v + 1] = offsets[v] + in_degree[v];
    in_edges.resize(graph.edges().size());
    std::vector<uint32_t> fill(offsets.begin(), offsets.end() - 1);
    for (auto& e : graph.edges()) {
        auto r = static_cast<size_t>(e.type);
        in_edges[fill[e.target]++] = {static_cast<uint8_t>(r), static_cast<uint32_t>(src_row[r][e.source]),
                                      static_cast<uint32_t>(tgt_row[r][e.target])};
    }
}

namespace {

void check_finite(const RowMatrix& m, const char* what, size_t layer) {
    if (m.allFinite()) return;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (!m.row(i).allFinite()) {
            throw Error(ErrorCode::NumericFailure, std::string("non-finite ") + what + " at layer " +
                                                       std::to_string(layer) + ", node " + std::to_string(i));
        }
    }
}

}  // namespace

RowMatrix forward(const GraphPlan& plan, const RowMatrix& embeddings, const RerankerParams& params,
                  ForwardCache* cache) {
    const auto& shape = params.shape;
    if (static_cast<size_t>(embeddings.rows()) != plan.node_count ||
        static_cast<size_t>(embeddings.cols()) != shape.input_dim) {
        throw Error(ErrorCode::DimensionMismatch,
                    "embeddings are " + std::to_string(embeddings.rows()) + "x" + std::to_string(embeddings.cols()) +
                        ", expected " + std::to_string(plan.node_count) + "x" + std::to_string(shape.input_dim));
    }
    check_finite(embeddings, "input embedding", 0);
    RowMatrix h = params.has_input_projection() ? RowMatrix(embeddings * params.input_projection.transpose())
                                                : embeddings;
    if (cache) {
        cache->embeddings = embeddings;
        cache->layers.assign(params.layers.size(), {});
    }
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(shape.key_dim));
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        std::array<RowMatrix, kNumEdgeTypes> queries, keys, messages;
        for (size_t r = 0; r < kNumEdgeTypes; ++r) {
            const auto& rel = plan.relations[r];
            if (rel.sources.empty()) continue;
            RowMatrix hs = gather_rows(h, rel.sources);
            RowMatrix ht = gather_rows(h, rel.targets);
            keys[r] = hs * layer.key[r].transpose();
            messages[r] = hs * layer.value[r].transpose();
            queries[r] = ht * layer.query[r].transpose();
        }
        RowMatrix out = h * layer.self.transpose();
        std::vector<double> attention(plan.in_edges.size());
        std::vector<double> logits;
        for (size_t v = 0; v < plan.node_count; ++v) {
            const auto begin = plan.offsets[v], end = plan.offsets[v + 1];
            if (begin == end) continue;
            logits.resize(end - begin);
            double max_logit = -std::numeric_limits<double>::infinity();
            for (auto e = begin; e < end; ++e) {
                const auto& edge = plan.in_edges[e];
                double s = queries[edge.relation].row(edge.target_row).dot(keys[edge.relation].row(edge.source_row)) *
                           inv_sqrt_dk;
                logits[e - begin] = s;
                max_logit = std::max(max_logit, s);
            }
            double total = 0;
            for (auto& s : logits) {
                s = std::exp(s - max_logit);
                total += s;
            }
            for (auto e = begin; e < end; ++e) {
                const auto& edge = plan.in_edges[e];
                const double a = logits[e - begin] / total;
                attention[e] = a;
                out.row(static_cast<Eigen::Index>(v)) += a * messages[edge.relation].row(edge.source_row);
            }
        }
        check_finite(out, "hidden state", l + 1);
        if (cache) {
            auto& c = cache->layers[l];
            c.input = std::move(h);
            c.queries = std::move(queries);
            c.keys = std::move(keys);
            c.messages = std::move(messages);
            c.attention = std::move(attention);
        }
        h = std::move(out);
    }
    if (cache) cache->output = h;
    return h;
}

Eigen::VectorXd score(const RowMatrix& hidden, const RerankerParams& params) {
    if (static_cast<size_t>(hidden.cols()) != params.shape.hidden_dim) {
        throw Error(ErrorCode::DimensionMismatch, "hidden width does not match the scoring head");
    }
    Eigen::VectorXd s = hidden * params.head_weight;
    s.array() += params.head_bias;
    return s;
}

double margin_loss(std::span<const double> scores, std::span<const uint32_t> positives,
                   std::span<const uint32_t> negatives, double margin) {
    if (positives.empty() || negatives.empty()) {
        throw Error(ErrorCode::InvalidArgument, "margin loss needs at least one positive and one negative");
    }
    double total = 0;
    for (auto p : positives) {
        for (auto n : negatives) total += std::max(0.0, margin - scores[p] + scores[n]);
    }
    return total;
}

double margin_loss_pairs(std::span<const double> scores, std::span<const ScorePair> pairs, double margin) {
    double total = 0;
    for (auto& pr : pairs) total += std::max(0.0, margin - scores[pr.positive] + scores[pr.negative]);
    return total;
}

double infonce_loss(double positive_score, std::span<const double> negative_scores) {
    if (negative_scores.empty()) throw Error(ErrorCode::InvalidArgument, "InfoNCE needs at least one negative");
    double m = positive_score;
    for (double s : negative_scores) m = std::max(m, s);
    double total = std::exp(positive_score - m);
    for (double s : negative_scores) total += std::exp(s - m);
    return -(positive_score - m - std::log(total));
}

namespace {

/// Accumulates d(loss)/d(params) for one instance, given d(loss)/d(scores).
void backward(const GraphPlan& plan, const ForwardCache& cache, const RerankerParams& params,
              const Eigen::VectorXd& score_grad, RerankerParams& grad) {
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(params.shape.key_dim));
    grad.head_weight += cache.output.transpose() * score_grad;
    grad.head_bias += score_grad.sum();
    RowMatrix g = score_grad * params.head_weight.transpose();  // N x d

    for (size_t l = params.layers.size(); l-- > 0;) {
        const auto& layer = params.layers[l];
        const auto& c = cache.layers[l];
        auto& gl = grad.layers[l];
        gl.self.noalias() += g.transpose() * c.input;
        RowMatrix dh = g * layer.self;

        std::array<RowMatrix, kNumEdgeTypes> d_messages, d_queries, d_keys;
        for (size_t r = 0; r < kNumEdgeTypes; ++r) {
            d_messages[r] = RowMatrix::Zero(c.messages[r].rows(), c.messages[r].cols());
            d_queries[r] = RowMatrix::Zero(c.queries[r].rows(), c.queries[r].cols());
            d_keys[r] = RowMatrix::Zero(c.keys[r].rows(), c.keys[r].cols());
        }
        std::vector<double> d_attention;
        for (size_t v = 0; v < plan.node_count; ++v) {
            const auto begin = plan.offsets[v], end = plan.offsets[v + 1];
            if (begin == end) continue;
            auto gv = g.row(static_cast<Eigen::Index>(v));
            d_attention.resize(end - begin);
            double weighted = 0;
            for (auto e = begin; e < end; ++e) {
                const auto& edge = plan.in_edges[e];
                const double a = c.attention[e];
                const double da = gv.dot(c.messages[edge.relation].row(edge.source_row));
                d_attention[e - begin] = da;
                weighted += a * da;
                d_messages[edge.relation].row(edge.source_row) += a * gv;
            }
            for (auto e = begin; e < end; ++e) {
                const auto& edge = plan.in_edges[e];
                const double ds = c.attention[e] * (d_attention[e - begin] - weighted) * inv_sqrt_dk;
                if (ds == 0) continue;
                d_queries[edge.relation].row(edge.target_row) += ds * c.keys[edge.relation].row(edge.source_row);
                d_keys[edge.relation].row(edge.source_row) += ds * c.queries[edge.relation].row(edge.target_row);
            }
        }
        for (size_t r = 0; r < kNumEdgeTypes; ++r) {
            const auto& rel = plan.relations[r];
            if (rel.sources.empty()) continue;
            RowMatrix hs = gather_rows(c.input, rel.sources);
            RowMatrix ht = gather_rows(c.input, rel.targets);
            gl.value[r].noalias() += d_messages[r].transpose() * hs;
            gl.key[r].noalias() += d_keys[r].transpose() * hs;
            gl.query[r].noalias() += d_queries[r].transpose() * ht;
            RowMatrix d_hs = d_messages[r] * layer.value[r] + d_keys[r] * layer.key[r];
            RowMatrix d_ht = d_queries[r] * layer.query[r];
            scatter_add_rows(dh, d_hs, rel.sources);
            scatter_add_rows(dh, d_ht, rel.targets);
        }
        g = std::move(dh);
    }
    if (params.has_input_projection()) grad.input_projection.noalias() += g.transpose() * cache.embeddings;
}

}  // namespace

double loss_and_gradient(const RerankerParams& params, std::span<const LossInstance> batch, double margin,
                         RerankerParams* grad) {
    if (batch.empty()) return 0.0;
    if (grad) *grad = params.zeros_like();
    const double scale = 1.0 / static_cast<double>(batch.size());
    double total = 0;
    for (auto& inst : batch) {
        ForwardCache cache;
        auto hidden = forward(*inst.plan, *inst.embeddings, params, grad ? &cache : nullptr);
        Eigen::VectorXd s = score(hidden, params);
        std::span<const double> scores(s.data(), static_cast<size_t>(s.size()));
        total += margin_loss_pairs(scores, inst.pairs, margin);
        if (!grad) continue;
        Eigen::VectorXd score_grad = Eigen::VectorXd::Zero(s.size());
        for (auto& pr : inst.pairs) {
            if (margin - s[pr.positive] + s[pr.negative] > 0) {
                score_grad[pr.positive] -= scale;
                score_grad[pr.negative] += scale;
            }
        }
        if (score_grad.isZero(0.0)) continue;
        backward(*inst.plan, cache, params, score_grad, *grad);
    }
    return total * scale;
}

namespace {

std::vector<ScorePair> sample_pairs(const TrainingExample& ex, size_t per_positive, std::mt19937_64& rng) {
    std::vector<ScorePair> pairs;
    const size_t take = std::min(per_positive, ex.negatives.size());
    std::vector<uint32_t> pool = ex.negatives;
    for (auto p : ex.positives) {
        // Partial Fisher-Yates: the first `take` slots become a uniform sample without replacement.
        for (size_t i = 0; i < take; ++i) {
            auto j = i + uniform_index(rng, pool.size() - i);
            std::swap(pool[i], pool[j]);
            pairs.push_back({p, pool[i]});
        }
    }
    return pairs;
}

void check_gradient_finite(RerankerParams& grad) {
    grad.for_each_tensor([](const std::string& name, Eigen::Map<Eigen::VectorXd> t) {
        if (!t.allFinite()) throw Error(ErrorCode::NumericFailure, "non-finite gradient in " + name);
    });
}

}  // namespace

TrainingResult train(std::span<const TrainingExample> examples, const TrainingConfig& config, size_t input_dim) {
    RerankerShape shape{input_dim, config.hidden_dim, config.key_dim ? config.key_dim : config.hidden_dim,
                        config.num_layers};
    auto params = init_params(shape, config.seed);
    params.quantize();
    return train_from(std::move(params), examples, config);
}

TrainingResult train_from(RerankerParams initial, std::span<const TrainingExample> examples,
                          const TrainingConfig& config) {
    if (config.margin <= 0) throw Error(ErrorCode::InvalidArgument, "margin must be positive");
    if (config.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
    for (auto& ex : examples) {
        if (ex.positives.empty() || ex.negatives.empty()) {
            throw Error(ErrorCode::InvalidArgument, "every training example needs positives and negatives");
        }
    }
    TrainingResult result{std::move(initial), {}, {}};
    auto& params = result.params;
    // Sampling stream is independent of the initialization stream.
    std::mt19937_64 rng(config.seed ^ 0x6a09e667f3bcc909ULL);
    std::vector<size_t> order(examples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    RerankerParams grad;
    size_t step = 0;
    for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
        double epoch_total = 0;
        size_t epoch_steps = 0;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            std::vector<LossInstance> batch;
            for (size_t k = start; k < std::min(order.size(), start + config.batch_size); ++k) {
                auto& ex = examples[order[k]];
                batch.push_back({ex.plan, &ex.embeddings, sample_pairs(ex, config.negatives_per_positive, rng)});
            }
            double loss = loss_and_gradient(params, batch, config.margin, &grad);
            if (!std::isfinite(loss)) throw Error(ErrorCode::NumericFailure, "non-finite training loss");
            check_gradient_finite(grad);
            // p -= lr * g, tensor by tensor; both visits walk the same order.
            std::vector<Eigen::Map<Eigen::VectorXd>> grads;
            grad.for_each_tensor([&](const std::string&, Eigen::Map<Eigen::VectorXd> t) { grads.push_back(t); });
            size_t idx = 0;
            params.for_each_tensor([&](const std::string&, Eigen::Map<Eigen::VectorXd> t) {
                t -= config.learning_rate * grads[idx++];
            });
            params.quantize();
            result.trace.push_back({epoch, step++, loss});
            epoch_total += loss;
            ++epoch_steps;
        }
        double mean = epoch_steps ? epoch_total / static_cast<double>(epoch_steps) : 0.0;
        result.epoch_loss.push_back(mean);
        const double initial_loss = result.epoch_loss.front();
        if (initial_loss > 0 && mean > config.divergence_factor * initial_loss) {
            throw Error(ErrorCode::Divergence, "epoch " + std::to_string(epoch) + " loss " + std::to_string(mean) +
                                                   " exceeds " + std::to_string(config.divergence_factor) +
                                                   "x the initial loss " + std::to_string(initial_loss));
        }
    }
    return result;
}

namespace {
constexpr uint32_t kWeightsVersion = 1;
constexpr std::string_view kWeightsMagic = "SSRERANK";
}  // namespace

std::string serialize_params(const RerankerParams& params) {
    ByteWriter head;
    head.u32(static_cast<uint32_t>(params.shape.num_layers));
    head.u32(static_cast<uint32_t>(params.shape.hidden_dim));
    head.u32(static_cast<uint32_t>(params.shape.key_dim));
    head.u32(static_cast<uint32_t>(params.shape.input_dim));
    head.u8(params.has_input_projection() ? 1 : 0);
    head.u32(static_cast<uint32_t>(kNumEdgeTypes));
    for (auto t : kAllEdgeTypes) head.str(to_string(t));

    ByteWriter body;
    auto copy = params;
    copy.for_each_tensor([&](const std::string&, Eigen::Map<Eigen::VectorXd> t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) body.f32(static_cast<float>(t[i]));
    });
    Container c;
    c.magic = make_magic(kWeightsMagic);
    c.version = kWeightsVersion;
    c.sections["HEAD"] = head.take();
    c.sections["PARM"] = body.take();
    return c.encode();
}

RerankerParams load_params(std::string_view bytes) {
    auto c = Container::decode(bytes, kWeightsMagic, kWeightsVersion);
    if (!c.sections.count("HEAD") || !c.sections.count("PARM")) {
        throw Error(ErrorCode::Corruption, "weights file lacks HEAD or PARM");
    }
    ByteReader head(c.sections["HEAD"]);
    RerankerShape shape;
    shape.num_layers = head.u32();
    shape.hidden_dim = head.u32();
    shape.key_dim = head.u32();
    shape.input_dim = head.u32();
    bool has_projection = head.u8() != 0;
    auto n_rel = head.u32();
    if (n_rel != kNumEdgeTypes) throw Error(ErrorCode::ShapeMismatch, "weights use a different relation set");
    for (auto t : kAllEdgeTypes) {
        if (head.str() != to_string(t)) throw Error(ErrorCode::ShapeMismatch, "weights use a different relation set");
    }
    if (has_projection != (shape.input_dim != shape.hidden_dim)) {
        throw Error(ErrorCode::ShapeMismatch, "input projection flag disagrees with the dimensions");
    }
    if (shape.hidden_dim == 0 || shape.key_dim == 0 || shape.input_dim == 0 || shape.num_layers > 64 ||
        shape.hidden_dim > 65536 || shape.key_dim > 65536 || shape.input_dim > 1u << 20) {
        throw Error(ErrorCode::ShapeMismatch, "implausible reranker dimensions");
    }
    auto params = init_params(shape, 0);
    ByteReader body(c.sections["PARM"]);
    const size_t expected = params.parameter_count() * 4;
    if (body.remaining() != expected) {
        throw Error(ErrorCode::ShapeMismatch, "parameter block has " + std::to_string(body.remaining()) +
                                                  " bytes, header implies " + std::to_string(expected));
    }
    params.for_each_tensor([&](const std::string&, Eigen::Map<Eigen::VectorXd> t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = static_cast<double>(body.f32());
    });
    return params;
}

void save_params(const RerankerParams& params, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_params(params));
}

RerankerParams load_params_file(const std::filesystem::path& path) { return load_params(read_file_bytes(path)); }

std::string format_loss_trace(std::span<const StepRecord> trace) {
    std::string out = "epoch,step,loss\n";
    char buf[96];
    for (auto& r : trace) {
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g\n", r.epoch, r.step, r.loss);
        out += buf;
    }
    return out;
}

}  // namespace schemasift
