#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace schemasift {

/// Probability that a random positive outscores a random negative, ties counting one half.
/// Computed by the trapezoid rule over tie groups. Throws InvalidArgument unless both classes
/// are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Average precision: sum over distinct descending thresholds of (recall gain) x precision.
double pr_auc(std::span<const double> scores, std::span<const int> labels);

struct OperatingPoint {
    double threshold;  // select scores >= threshold
    double precision;
    double recall;
    size_t selected;
};

/// The highest threshold whose selection reaches `recall_floor`, so precision is as large as the
/// floor allows. A floor of 0 selects nothing (threshold +inf, precision 1 by convention).
OperatingPoint precision_at_high_recall(std::span<const double> scores, std::span<const int> labels,
                                        double recall_floor = 0.99);

struct PrfPoint {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

/// An empty selection has precision 1 when nothing is relevant and 0 otherwise; recall is 1 when
/// nothing is relevant; F1 is 0 when precision and recall are both 0.
PrfPoint prf(size_t true_positive, size_t selected, size_t relevant);

/// One question's scores and labels, plus the selection after connectivity closure.
struct EvalExample {
    std::vector<double> scores;
    std::vector<int> labels;
    /// Given a raw selection mask, returns the closed selection mask (superset). May be empty,
    /// in which case the closed curves equal the raw ones.
    std::function<std::vector<bool>(const std::vector<bool>&)> close;
};

struct CurvePoint {
    double x;  // threshold or k
    PrfPoint raw;
    PrfPoint closed;
};

struct EvalReport {
    double roc_auc = 0;  // pooled over all examples
    double pr_auc = 0;
    OperatingPoint operating_point{};
    double macro_roc_auc = 0;  // mean over examples with both classes
    std::vector<CurvePoint> threshold_curve;
    std::vector<CurvePoint> k_curve;
    /// Macro P/R/F1 at a top-fraction cut, when requested.
    double top_fraction = 0;
    PrfPoint top_fraction_raw;
    PrfPoint top_fraction_closed;
};

struct SweepOptions {
    std::vector<double> thresholds;  // empty: 101 evenly spaced points over the pooled score range
    size_t k_min = 2;
    size_t k_max = 20;
    double recall_floor = 0.99;
    double top_fraction = 0.2;
};

/// Macro (mean of per-example) curves over thresholds and top-k cuts, for raw and closed
/// selections, plus pooled ROC/PR AUC and the high-recall operating point.
EvalReport sweep_metrics(std::span<const EvalExample> examples, const SweepOptions& options = {});

/// Selection mask of the top ceil(fraction * n) scores, ties by index.
std::vector<bool> top_fraction_mask(std::span<const double> scores, double fraction);
std::vector<bool> top_k_mask(std::span<const double> scores, size_t k);

std::string curve_csv(std::span<const CurvePoint> curve, const std::string& x_name);

}  // namespace schemasift
