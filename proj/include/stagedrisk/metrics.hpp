#pragma once

#include <span>
#include <vector>

namespace staged {

struct RocPoint {
    double threshold;
    double sensitivity;
    double specificity;
};

// Operating points under the rule: score >= threshold => predicted positive.
// Thresholds are the distinct scores in decreasing order, between a +inf
// sentinel (sens 0, spec 1) and a -inf sentinel (sens 1, spec 0).
struct RocCurve {
    std::vector<RocPoint> points;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

struct ConfusionMetrics {
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
};

struct MetricSet {
    double auc = 0.0;
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
};

struct Stat {
    double mean = 0.0;
    double sd = 0.0;
};

struct MetricSummary {
    Stat auc, accuracy, sensitivity, specificity;
    std::size_t runs = 0;
};

struct YoudenResult {
    double threshold = 0.0;
    double j = 0.0;
};

RocCurve roc_points(std::span<const double> scores, std::span<const int> labels);

// Trapezoidal area over (1 - specificity, sensitivity).
double auc_trapezoid(const RocCurve& curve);

// Threshold maximizing J = sensitivity + specificity - 1 over the
// non-sentinel points; ties break toward the smallest threshold.
YoudenResult youden_best(const RocCurve& curve);

ConfusionMetrics confusion_at(std::span<const double> scores, std::span<const int> labels,
                              double threshold);

// Arithmetic mean and sample SD (n-1; zero for a single value).
Stat mean_sd(std::span<const double> values);

MetricSummary summarize_runs(const std::vector<MetricSet>& per_run);

// T-value cutoff baseline: predicted at-risk iff t_value <= cutoff
// (WHO conventions: -1.0 osteopenia, -2.5 osteoporosis).
ConfusionMetrics cutoff_classify(std::span<const double> t_values, std::span<const int> labels,
                                 double cutoff);

} // namespace staged
