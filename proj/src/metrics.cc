#include "schemasift/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "schemasift/error.h"

namespace schemasift {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels, bool need_both) {
    if (scores.size() != labels.size()) {
        throw Error(ErrorCode::InvalidArgument, "score and label counts differ");
    }
    size_t pos = 0;
    for (auto l : labels) pos += l != 0;
    if (need_both && (pos == 0 || pos == labels.size())) {
        throw Error(ErrorCode::InvalidArgument, "labels must contain both classes");
    }
    for (auto s : scores) {
        if (!std::isfinite(s)) throw Error(ErrorCode::NumericFailure, "non-finite score");
    }
}

/// Indices sorted by descending score; ties keep index order.
std::vector<uint32_t> descending(std::span<const double> scores) {
    std::vector<uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) { return scores[a] > scores[b]; });
    return order;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels, true);
    auto order = descending(scores);
    double pos_total = 0, neg_total = 0;
    for (auto l : labels) (l ? pos_total : neg_total) += 1;
    double tp = 0, fp = 0, area = 0;
    for (size_t i = 0; i < order.size();) {
        double tp_prev = tp, fp_prev = fp;
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] ? tp : fp) += 1;
            ++j;
        }
        area += (fp - fp_prev) * (tp + tp_prev) / 2.0;
        i = j;
    }
    return area / (pos_total * neg_total);
}

double pr_auc(std::span<const double> scores, std::span<const int> labels) {
    check_inputs(scores, labels, true);
    auto order = descending(scores);
    double pos_total = 0;
    for (auto l : labels) pos_total += l != 0;
    double tp = 0, selected = 0, recall_prev = 0, ap = 0;
    for (size_t i = 0; i < order.size();) {
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            tp += labels[order[j]] != 0;
            selected += 1;
            ++j;
        }
        const double recall = tp / pos_total;
        ap += (recall - recall_prev) * (tp / selected);
        recall_prev = recall;
        i = j;
    }
    return ap;
}

OperatingPoint precision_at_high_recall(std::span<const double> scores, std::span<const int> labels,
                                        double recall_floor) {
    check_inputs(scores, labels, false);
    double pos_total = 0;
    for (auto l : labels) pos_total += l != 0;
    if (pos_total == 0) throw Error(ErrorCode::InvalidArgument, "no positive labels");
    if (recall_floor <= 0) return {std::numeric_limits<double>::infinity(), 1.0, 0.0, 0};
    auto order = descending(scores);
    double tp = 0;
    size_t selected = 0;
    OperatingPoint last{};
    for (size_t i = 0; i < order.size();) {
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            tp += labels[order[j]] != 0;
            ++selected;
            ++j;
        }
        last = {scores[order[i]], tp / static_cast<double>(selected), tp / pos_total, selected};
        if (last.recall >= recall_floor) return last;
        i = j;
    }
    return last;  // floor unreachable: everything selected
}

PrfPoint prf(size_t true_positive, size_t selected, size_t relevant) {
    PrfPoint p;
    p.precision = selected ? static_cast<double>(true_positive) / static_cast<double>(selected) : (relevant ? 0.0 : 1.0);
    p.recall = relevant ? static_cast<double>(true_positive) / static_cast<double>(relevant) : 1.0;
    p.f1 = (p.precision + p.recall) > 0 ? 2 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
    return p;
}

std::vector<bool> top_k_mask(std::span<const double> scores, size_t k) {
    auto order = descending(scores);
    std::vector<bool> mask(scores.size(), false);
    for (size_t i = 0; i < std::min(k, order.size()); ++i) mask[order[i]] = true;
    return mask;
}

std::vector<bool> top_fraction_mask(std::span<const double> scores, double fraction) {
    if (!(fraction > 0 && fraction <= 1)) throw Error(ErrorCode::InvalidArgument, "fraction must lie in (0, 1]");
    auto k = static_cast<size_t>(std::ceil(fraction * static_cast<double>(scores.size()) - 1e-9));
    return top_k_mask(scores, k);
}

namespace {

PrfPoint evaluate_mask(const std::vector<bool>& mask, std::span<const int> labels) {
    size_t tp = 0, selected = 0, relevant = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        relevant += labels[i] != 0;
        if (!mask[i]) continue;
        ++selected;
        tp += labels[i] != 0;
    }
    return prf(tp, selected, relevant);
}

struct MacroAccumulator {
    PrfPoint raw, closed;
    void add(const PrfPoint& r, const PrfPoint& c) {
        raw.precision += r.precision;
        raw.recall += r.recall;
        raw.f1 += r.f1;
        closed.precision += c.precision;
        closed.recall += c.recall;
        closed.f1 += c.f1;
    }
    void divide(double n) {
        for (auto* p : {&raw, &closed}) {
            p->precision /= n;
            p->recall /= n;
            p->f1 /= n;
        }
    }
};

std::pair<PrfPoint, PrfPoint> evaluate_both(const EvalExample& ex, const std::vector<bool>& mask) {
    auto raw = evaluate_mask(mask, ex.labels);
    bool any = std::find(mask.begin(), mask.end(), true) != mask.end();
    if (!ex.close || !any) return {raw, raw};
    return {raw, evaluate_mask(ex.close(mask), ex.labels)};
}

}  // namespace

EvalReport sweep_metrics(std::span<const EvalExample> examples, const SweepOptions& options) {
    if (examples.empty()) throw Error(ErrorCode::InvalidArgument, "no examples to evaluate");
    EvalReport report;
    std::vector<double> pooled_scores;
    std::vector<int> pooled_labels;
    double macro_auc = 0;
    size_t auc_count = 0;
    for (auto& ex : examples) {
        check_inputs(ex.scores, ex.labels, false);
        pooled_scores.insert(pooled_scores.end(), ex.scores.begin(), ex.scores.end());
        pooled_labels.insert(pooled_labels.end(), ex.labels.begin(), ex.labels.end());
        size_t pos = 0;
        for (auto l : ex.labels) pos += l != 0;
        if (pos > 0 && pos < ex.labels.size()) {
            macro_auc += roc_auc(ex.scores, ex.labels);
            ++auc_count;
        }
    }
    report.macro_roc_auc = auc_count ? macro_auc / static_cast<double>(auc_count) : 0.0;
    size_t pooled_pos = 0;
    for (auto l : pooled_labels) pooled_pos += l != 0;
    if (pooled_pos > 0 && pooled_pos < pooled_labels.size()) {
        report.roc_auc = roc_auc(pooled_scores, pooled_labels);
        report.pr_auc = pr_auc(pooled_scores, pooled_labels);
        report.operating_point = precision_at_high_recall(pooled_scores, pooled_labels, options.recall_floor);
    }

    auto thresholds = options.thresholds;
    if (thresholds.empty() && !pooled_scores.empty()) {
        auto [lo, hi] = std::minmax_element(pooled_scores.begin(), pooled_scores.end());
        for (int i = 0; i <= 100; ++i) thresholds.push_back(*lo + (*hi - *lo) * i / 100.0);
    }
    const double n = static_cast<double>(examples.size());
    for (double t : thresholds) {
        MacroAccumulator acc;
        for (auto& ex : examples) {
            std::vector<bool> mask(ex.scores.size());
            for (size_t i = 0; i < mask.size(); ++i) mask[i] = ex.scores[i] >= t;
            auto [r, c] = evaluate_both(ex, mask);
            acc.add(r, c);
        }
        acc.divide(n);
        report.threshold_curve.push_back({t, acc.raw, acc.closed});
    }
    for (size_t k = options.k_min; k <= options.k_max; ++k) {
        MacroAccumulator acc;
        for (auto& ex : examples) {
            auto [r, c] = evaluate_both(ex, top_k_mask(ex.scores, k));
            acc.add(r, c);
        }
        acc.divide(n);
        report.k_curve.push_back({static_cast<double>(k), acc.raw, acc.closed});
    }
    if (options.top_fraction > 0) {
        MacroAccumulator acc;
        for (auto& ex : examples) {
            auto [r, c] = evaluate_both(ex, top_fraction_mask(ex.scores, options.top_fraction));
            acc.add(r, c);
        }
        acc.divide(n);
        report.top_fraction = options.top_fraction;
        report.top_fraction_raw = acc.raw;
        report.top_fraction_closed = acc.closed;
    }
    return report;
}

std::string curve_csv(std::span<const CurvePoint> curve, const std::string& x_name) {
    std::string out = x_name + ",precision,recall,f1,closed_precision,closed_recall,closed_f1\n";
    char buf[256];
    for (auto& p : curve) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", p.x, p.raw.precision,
                      p.raw.recall, p.raw.f1, p.closed.precision, p.closed.recall, p.closed.f1);
        out += buf;
    }
    return out;
}

}  // namespace schemasift
