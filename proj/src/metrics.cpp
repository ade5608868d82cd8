#include "stagedrisk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace staged {

namespace {

void check_two_classes(std::span<const int> labels) {
    bool pos = false, neg = false;
    for (int y : labels) {
        if (y == 1)
            pos = true;
        else if (y == 0)
            neg = true;
        else
            throw std::invalid_argument("metrics: labels must be 0/1");
    }
    if (!pos || !neg) throw std::invalid_argument("metrics: both classes must be present");
}

} // namespace

RocCurve roc_points(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("roc_points: scores/labels size mismatch");
    check_two_classes(labels);
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("roc_points: non-finite score");

    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::size_t p = 0, q = 0;
    for (int y : labels) (y == 1 ? p : q) += 1;

    RocCurve curve;
    curve.positives = p;
    curve.negatives = q;
    const double inf = std::numeric_limits<double>::infinity();
    curve.points.push_back({inf, 0.0, 1.0});

    // Sweep thresholds downward through the distinct scores; at threshold t
    // every sample with score >= t is predicted positive.
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < n) {
        double t = scores[order[i]];
        while (i < n && scores[order[i]] == t) {
            (labels[order[i]] == 1 ? tp : fp) += 1;
            ++i;
        }
        curve.points.push_back({t, static_cast<double>(tp) / static_cast<double>(p),
                                static_cast<double>(q - fp) / static_cast<double>(q)});
    }
    curve.points.push_back({-inf, 1.0, 0.0});
    return curve;
}

double auc_trapezoid(const RocCurve& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        double x0 = 1.0 - curve.points[i - 1].specificity;
        double x1 = 1.0 - curve.points[i].specificity;
        double y0 = curve.points[i - 1].sensitivity;
        double y1 = curve.points[i].sensitivity;
        area += (x1 - x0) * (y0 + y1) * 0.5;
    }
    return area;
}

YoudenResult youden_best(const RocCurve& curve) {
    YoudenResult best{0.0, -1.0};
    for (const auto& pt : curve.points) {
        if (std::isinf(pt.threshold)) continue;
        double j = pt.sensitivity + pt.specificity - 1.0;
        if (j > best.j || (j == best.j && pt.threshold < best.threshold)) {
            best = {pt.threshold, j};
        }
    }
    if (best.j < 0.0) {
        // Curve of sentinels only cannot occur: roc_points always emits at
        // least one real threshold. Guard anyway.
        throw std::logic_error("youden_best: curve has no non-sentinel points");
    }
    return best;
}

ConfusionMetrics confusion_at(std::span<const double> scores, std::span<const int> labels,
                              double threshold) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("confusion_at: scores/labels size mismatch");
    check_two_classes(labels);
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        bool predicted = scores[i] >= threshold;
        if (labels[i] == 1)
            (predicted ? tp : fn) += 1;
        else
            (predicted ? fp : tn) += 1;
    }
    ConfusionMetrics m;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
    m.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
    m.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
    return m;
}

Stat mean_sd(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean_sd: empty input");
    bool all_equal = true;
    for (double v : values)
        if (v != values.front()) {
            all_equal = false;
            break;
        }
    if (all_equal) return {values.front(), 0.0};
    double sum = 0.0;
    for (double v : values) sum += v;
    double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

MetricSummary summarize_runs(const std::vector<MetricSet>& per_run) {
    if (per_run.empty()) throw std::invalid_argument("summarize_runs: no runs");
    std::vector<double> a, b, c, d;
    a.reserve(per_run.size());
    b.reserve(per_run.size());
    c.reserve(per_run.size());
    d.reserve(per_run.size());
    for (const auto& m : per_run) {
        a.push_back(m.auc);
        b.push_back(m.accuracy);
        c.push_back(m.sensitivity);
        d.push_back(m.specificity);
    }
    MetricSummary s;
    s.auc = mean_sd(a);
    s.accuracy = mean_sd(b);
    s.sensitivity = mean_sd(c);
    s.specificity = mean_sd(d);
    s.runs = per_run.size();
    return s;
}

ConfusionMetrics cutoff_classify(std::span<const double> t_values, std::span<const int> labels,
                                 double cutoff) {
    if (t_values.size() != labels.size())
        throw std::invalid_argument("cutoff_classify: size mismatch");
    check_two_classes(labels);
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < t_values.size(); ++i) {
        bool predicted = t_values[i] <= cutoff;
        if (labels[i] == 1)
            (predicted ? tp : fn) += 1;
        else
            (predicted ? fp : tn) += 1;
    }
    ConfusionMetrics m;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(t_values.size());
    m.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
    m.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
    return m;
}

} // namespace staged
