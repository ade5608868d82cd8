#include "stagedrisk/cascade.hpp"

#include "stagedrisk/glm.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>

namespace staged {

namespace {

constexpr std::uint64_t kStage1Tag = 0xca51;
constexpr std::uint64_t kStage2Tag = 0xca52;
constexpr std::uint64_t kSingleRunTag = 0x417;
constexpr std::uint64_t kTwoStageRunTag = 0x725;
constexpr std::uint64_t kSplitTag = 0xa;
constexpr std::uint64_t kTrainTag = 0xb;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

// Column indices for the named features, erroring on absent names.
std::vector<std::size_t> gather_columns(const Cohort& cohort,
                                        const std::vector<std::string>& features,
                                        const std::string& what) {
    std::vector<std::size_t> cols;
    cols.reserve(features.size());
    for (const auto& f : features) {
        auto idx = cohort.schema().index_of(f);
        if (!idx) fail(what + ": feature '" + f + "' missing from data");
        cols.push_back(*idx);
    }
    return cols;
}

// Runs fn(i) for i in [0, n). With threads > 1 the index range is split
// into contiguous chunks; every fn(i) writes only to slot i of its output,
// so the result is identical to the sequential order.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    threads = std::min(threads, n);
    std::vector<std::future<void>> futures;
    futures.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        std::size_t lo = n * t / threads;
        std::size_t hi = n * (t + 1) / threads;
        futures.push_back(std::async(std::launch::async, [lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        }));
    }
    for (auto& f : futures) f.get();
}

struct RowScore {
    double probability = 0.0;
    double z = 0.0;
    int stage = 1;
    bool predicted = false;
    double merged = 0.0;
};

RowScore score_row(const CascadeModel& model, const Cohort& cohort, std::size_t row,
                   const std::vector<std::size_t>& cols1, const std::vector<std::size_t>& cols2,
                   MergedScoreMode merged, std::vector<double>& x1, std::vector<double>& x2) {
    for (std::size_t k = 0; k < cols1.size(); ++k) {
        double v = cohort.value(row, cols1[k]);
        if (std::isnan(v))
            fail("cascade: missing value in stage-1 feature '" +
                 model.stage1.feature_names[k] + "' for sample '" + cohort.sample(row).id + "'");
        x1[k] = v;
    }
    PredictionStats stats1 = ensemble_stats(model.stage1.members, x1);
    RowScore out;
    out.z = uncertainty_z(stats1, model.stage1.threshold);

    double threshold;
    if (out.z >= model.z_cutoff) {
        out.stage = 1;
        out.probability = stats1.mean;
        threshold = model.stage1.threshold;
    } else {
        for (std::size_t k = 0; k < cols2.size(); ++k) {
            double v = cohort.value(row, cols2[k]);
            if (std::isnan(v))
                throw NeedsImagingError("sample '" + cohort.sample(row).id +
                                        "' needs imaging: stage-2 feature '" +
                                        model.stage2.feature_names[k] + "' is missing");
            x2[k] = v;
        }
        PredictionStats stats2 = ensemble_stats(model.stage2.members, x2);
        out.stage = 2;
        out.probability = stats2.mean;
        threshold = model.stage2.threshold;
    }
    out.predicted = out.probability >= threshold;
    out.merged = merged == MergedScoreMode::raw ? out.probability
                                                : out.probability - threshold + 0.5;
    return out;
}

TwoStageSummary summarize_two_stage(std::vector<TwoStageRun> runs) {
    TwoStageSummary summary;
    summary.runs = runs.size();

    std::vector<MetricSet> overall, s1, s2;
    std::vector<double> acc1, acc2, frac1, frac2, uncertain;
    for (const auto& r : runs) {
        overall.push_back(r.cascade.overall);
        s1.push_back(r.stage1_alone);
        s2.push_back(r.stage2_alone);
        if (r.cascade.stage1_accuracy) acc1.push_back(*r.cascade.stage1_accuracy);
        if (r.cascade.stage2_accuracy) acc2.push_back(*r.cascade.stage2_accuracy);
        frac1.push_back(r.cascade.stage1_fraction);
        frac2.push_back(r.cascade.stage2_fraction);
        uncertain.push_back(static_cast<double>(r.cascade.n_uncertain));
    }
    summary.overall = summarize_runs(overall);
    summary.stage1_alone = summarize_runs(s1);
    summary.stage2_alone = summarize_runs(s2);
    summary.stage1_accuracy = mean_sd(acc1);
    summary.stage2_accuracy = mean_sd(acc2);
    summary.stage1_accuracy_runs = acc1.size();
    summary.stage2_accuracy_runs = acc2.size();
    summary.stage1_fraction = mean_sd(frac1);
    summary.stage2_fraction = mean_sd(frac2);
    summary.n_uncertain = mean_sd(uncertain);
    summary.per_run = std::move(runs);
    return summary;
}

TwoStageSummary run_two_stage_protocol(const Cohort& train_source, const Cohort* fixed_test,
                                       const std::vector<std::string>& clinical_features,
                                       const std::vector<std::string>& stage2_features,
                                       std::size_t runs, const CascadeConfig& config,
                                       const RngStream& rng) {
    if (runs == 0) fail("protocol: runs must be >= 1");
    gather_columns(train_source, clinical_features, "protocol");
    gather_columns(train_source, stage2_features, "protocol");

    std::vector<TwoStageRun> results(runs);
    parallel_for(runs, config.threads, [&](std::size_t r) {
        RngStream run_rng = rng.child(kTwoStageRunTag, r);
        std::uint64_t split_seed = run_rng.child(kSplitTag).next_u64();
        auto [train, test] = stratified_split(train_source, config.train_frac, split_seed);

        CascadeModel model = train_cascade(train, clinical_features, stage2_features, config,
                                           run_rng.child(kTrainTag));
        const Cohort& eval = fixed_test ? *fixed_test : test;
        results[r].cascade = evaluate_cascade(model, eval, config.merged_score);
        results[r].stage1_alone = evaluate_ensemble(model.stage1, eval);
        results[r].stage2_alone = evaluate_ensemble(model.stage2, eval);
    });
    return summarize_two_stage(std::move(results));
}

} // namespace

double uncertainty_z(const PredictionStats& stats, double threshold) {
    double diff = std::abs(stats.mean - threshold);
    if (stats.sd == 0.0)
        return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / stats.sd;
}

std::string to_string(MergedScoreMode mode) {
    return mode == MergedScoreMode::raw ? "raw" : "shifted";
}

MergedScoreMode merged_score_mode_from_string(const std::string& s) {
    if (s == "raw") return MergedScoreMode::raw;
    if (s == "shifted") return MergedScoreMode::shifted;
    fail("unknown merged-score mode '" + s + "'");
}

CascadeModel train_cascade(const Cohort& train, const std::vector<std::string>& clinical_features,
                           const std::vector<std::string>& stage2_features,
                           const CascadeConfig& config, const RngStream& rng) {
    if (config.z_cutoff < 0.0) fail("train_cascade: z_cutoff must be >= 0");
    bool adds_information = false;
    for (const auto& f : stage2_features)
        if (std::find(clinical_features.begin(), clinical_features.end(), f) ==
            clinical_features.end())
            adds_information = true;
    if (!adds_information)
        fail("train_cascade: stage 2 adds no features beyond stage 1 (empty imaging list)");

    CvOptions cv{config.folds, config.bags, config.final_mode};
    CascadeModel model;
    model.stage1 = train_ensemble_cv(train, clinical_features, cv, rng.child(kStage1Tag),
                                     StageLabel::clinical);
    model.stage2 = train_ensemble_cv(train, stage2_features, cv, rng.child(kStage2Tag),
                                     StageLabel::clinical_imaging);
    model.z_cutoff = config.z_cutoff;
    return model;
}

CaseDecision cascade_predict(const CascadeModel& model, const Cohort& cohort, std::size_t row) {
    auto cols1 = gather_columns(cohort, model.stage1.feature_names, "cascade");
    auto cols2 = gather_columns(cohort, model.stage2.feature_names, "cascade");
    std::vector<double> x1(cols1.size()), x2(cols2.size());
    RowScore s = score_row(model, cohort, row, cols1, cols2, MergedScoreMode::raw, x1, x2);
    return {cohort.sample(row).id, s.stage, s.probability, s.z, s.predicted};
}

CascadeReport evaluate_cascade(const CascadeModel& model, const Cohort& test,
                               MergedScoreMode merged, std::vector<CaseDecision>* decisions) {
    if (test.empty()) fail("evaluate_cascade: empty test cohort");
    auto cols1 = gather_columns(test, model.stage1.feature_names, "cascade");
    auto cols2 = gather_columns(test, model.stage2.feature_names, "cascade");
    std::vector<double> x1(cols1.size()), x2(cols2.size());

    const std::vector<int> labels = test.labels();
    std::vector<double> merged_scores(test.size());
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    std::size_t stage_n[2] = {0, 0}, stage_correct[2] = {0, 0};
    if (decisions) decisions->clear();

    for (std::size_t i = 0; i < test.size(); ++i) {
        RowScore s = score_row(model, test, i, cols1, cols2, merged, x1, x2);
        merged_scores[i] = s.merged;
        bool actual = labels[i] != 0;
        (s.predicted ? (actual ? tp : fp) : (actual ? fn : tn))++;
        ++stage_n[s.stage - 1];
        if (s.predicted == actual) ++stage_correct[s.stage - 1];
        if (decisions)
            decisions->push_back({test.sample(i).id, s.stage, s.probability, s.z, s.predicted});
    }

    const double n = static_cast<double>(test.size());
    CascadeReport report;
    report.overall.auc = auc_trapezoid(roc_points(merged_scores, labels));
    report.overall.accuracy = static_cast<double>(tp + tn) / n;
    report.overall.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
    report.overall.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
    if (stage_n[0] > 0)
        report.stage1_accuracy =
            static_cast<double>(stage_correct[0]) / static_cast<double>(stage_n[0]);
    if (stage_n[1] > 0)
        report.stage2_accuracy =
            static_cast<double>(stage_correct[1]) / static_cast<double>(stage_n[1]);
    report.stage1_fraction = static_cast<double>(stage_n[0]) / n;
    report.stage2_fraction = static_cast<double>(stage_n[1]) / n;
    report.n_uncertain = stage_n[1];
    return report;
}

MetricSet evaluate_ensemble(const EnsembleModel& model, const Cohort& test) {
    auto cols = gather_columns(test, model.feature_names, "ensemble evaluation");
    std::vector<double> x(cols.size());
    std::vector<double> scores(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
            double v = test.value(i, cols[k]);
            if (std::isnan(v))
                fail("ensemble evaluation: missing value in '" + model.feature_names[k] +
                     "' for sample '" + test.sample(i).id + "'");
            x[k] = v;
        }
        scores[i] = ensemble_stats(model.members, x).mean;
    }
    const std::vector<int> labels = test.labels();
    ConfusionMetrics cm = confusion_at(scores, labels, model.threshold);
    return {auc_trapezoid(roc_points(scores, labels)), cm.accuracy, cm.sensitivity,
            cm.specificity};
}

MetricSummary protocol_single_ensemble(const Cohort& cohort,
                                       const std::vector<std::string>& features,
                                       std::size_t runs, std::size_t folds, const RngStream& rng,
                                       std::size_t threads, std::vector<MetricSet>* per_run) {
    if (runs == 0) fail("protocol: runs must be >= 1");
    const std::vector<int> all_labels = cohort.labels();
    const Eigen::MatrixXd X_full = feature_matrix(cohort, features);
    const Eigen::VectorXd y_full = label_vector(cohort);

    std::vector<MetricSet> results(runs);
    parallel_for(runs, threads, [&](std::size_t r) {
        RngStream run_rng = rng.child(kSingleRunTag, r);
        RngStream boot = run_rng.child(kSplitTag);
        std::vector<std::size_t> rows = bootstrap_indices(all_labels, boot);

        std::vector<int> labels(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = all_labels[rows[i]];
        auto fold_sets = stratified_kfold(labels, folds, run_rng.child(kTrainTag));

        MetricSet sum;
        for (const auto& val_rows : fold_sets) {
            std::vector<char> in_val(rows.size(), 0);
            for (std::size_t i : val_rows) in_val[i] = 1;

            std::vector<std::size_t> train_rows;
            train_rows.reserve(rows.size() - val_rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i)
                if (!in_val[i]) train_rows.push_back(i);

            Eigen::MatrixXd X_train(train_rows.size(), X_full.cols());
            Eigen::VectorXd y_train(train_rows.size());
            for (std::size_t i = 0; i < train_rows.size(); ++i) {
                X_train.row(static_cast<Eigen::Index>(i)) =
                    X_full.row(static_cast<Eigen::Index>(rows[train_rows[i]]));
                y_train(static_cast<Eigen::Index>(i)) =
                    static_cast<double>(labels[train_rows[i]]);
            }
            LogisticModel fit = fit_logistic(X_train, y_train, features);

            std::vector<double> scores(val_rows.size());
            std::vector<int> val_labels(val_rows.size());
            std::vector<double> x(static_cast<std::size_t>(X_full.cols()));
            for (std::size_t i = 0; i < val_rows.size(); ++i) {
                for (Eigen::Index j = 0; j < X_full.cols(); ++j)
                    x[static_cast<std::size_t>(j)] =
                        X_full(static_cast<Eigen::Index>(rows[val_rows[i]]), j);
                scores[i] = fit.predict_proba(x);
                val_labels[i] = labels[val_rows[i]];
            }

            RocCurve roc = roc_points(scores, val_labels);
            YoudenResult youden = youden_best(roc);
            ConfusionMetrics cm = confusion_at(scores, val_labels, youden.threshold);
            sum.auc += auc_trapezoid(roc);
            sum.accuracy += cm.accuracy;
            sum.sensitivity += cm.sensitivity;
            sum.specificity += cm.specificity;
        }
        const double k = static_cast<double>(fold_sets.size());
        results[r] = {sum.auc / k, sum.accuracy / k, sum.sensitivity / k, sum.specificity / k};
    });

    MetricSummary summary = summarize_runs(results);
    if (per_run) *per_run = std::move(results);
    return summary;
}

TwoStageSummary protocol_two_stage(const Cohort& cohort,
                                   const std::vector<std::string>& clinical_features,
                                   const std::vector<std::string>& stage2_features,
                                   std::size_t runs, const CascadeConfig& config,
                                   const RngStream& rng) {
    return run_two_stage_protocol(cohort, nullptr, clinical_features, stage2_features, runs,
                                  config, rng);
}

TwoStageSummary protocol_external(const Cohort& internal, const Cohort& external,
                                  const std::vector<std::string>& clinical_features,
                                  const std::vector<std::string>& stage2_features,
                                  std::size_t runs, const CascadeConfig& config,
                                  const RngStream& rng) {
    auto check = [&](const Cohort& c, const char* which) {
        for (const auto& f : clinical_features)
            if (!c.schema().contains(f))
                fail(std::string("schema mismatch: feature '") + f + "' missing from the " +
                     which + " cohort");
        for (const auto& f : stage2_features)
            if (!c.schema().contains(f))
                fail(std::string("schema mismatch: feature '") + f + "' missing from the " +
                     which + " cohort");
    };
    check(internal, "internal");
    check(external, "external");
    return run_two_stage_protocol(internal, &external, clinical_features, stage2_features, runs,
                                  config, rng);
}

nlohmann::json cascade_to_json(const CascadeModel& model) {
    return nlohmann::json{{"format", "cascade-model"},
                          {"version", 1},
                          {"z_cutoff", model.z_cutoff},
                          {"stage1", ensemble_to_json(model.stage1)},
                          {"stage2", ensemble_to_json(model.stage2)}};
}

CascadeModel cascade_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "cascade-model")
        fail("model document: not a cascade-model file");
    if (doc.value("version", 0) != 1)
        fail("model document: unsupported version");
    CascadeModel model;
    model.z_cutoff = doc.at("z_cutoff").get<double>();
    model.stage1 = ensemble_from_json(doc.at("stage1"));
    model.stage2 = ensemble_from_json(doc.at("stage2"));
    return model;
}

} // namespace staged
