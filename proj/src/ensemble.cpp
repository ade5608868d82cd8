#include "stagedrisk/ensemble.hpp"

#include "stagedrisk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace staged {

namespace {

constexpr std::uint64_t kFoldTag = 0xf01d;
constexpr std::uint64_t kBagTag = 0xba6;
constexpr std::uint64_t kRefitTag = 0x3f17;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void shuffle_indices(std::vector<std::size_t>& v, RngStream& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[rng.uniform_index(i)]);
}

std::vector<std::vector<std::size_t>> deal_folds(const std::vector<int>& labels,
                                                 std::size_t folds, const RngStream& rng,
                                                 std::uint64_t attempt) {
    std::vector<std::size_t> neg, pos;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);

    std::vector<std::vector<std::size_t>> out(folds);
    auto deal = [&](std::vector<std::size_t>& cls, std::uint64_t tag) {
        RngStream stream = rng.child(0x5f01d, attempt, tag);
        shuffle_indices(cls, stream);
        for (std::size_t i = 0; i < cls.size(); ++i) out[i % folds].push_back(cls[i]);
    };
    deal(neg, 0);
    deal(pos, 1);
    for (auto& fold : out) std::sort(fold.begin(), fold.end());
    return out;
}

bool folds_ok(const std::vector<std::vector<std::size_t>>& folds,
              const std::vector<int>& labels) {
    for (const auto& fold : folds) {
        bool has_pos = false, has_neg = false;
        for (std::size_t i : fold) (labels[i] ? has_pos : has_neg) = true;
        if (!has_pos || !has_neg) return false;
    }
    return true;
}

} // namespace

std::string to_string(StageLabel label) {
    return label == StageLabel::clinical ? "clinical" : "clinical+imaging";
}

StageLabel stage_label_from_string(const std::string& s) {
    if (s == "clinical") return StageLabel::clinical;
    if (s == "clinical+imaging") return StageLabel::clinical_imaging;
    fail("unknown stage label '" + s + "'");
}

std::string to_string(FinalMode mode) {
    return mode == FinalMode::best_fold ? "best_fold" : "refit_full";
}

FinalMode final_mode_from_string(const std::string& s) {
    if (s == "best_fold") return FinalMode::best_fold;
    if (s == "refit_full") return FinalMode::refit_full;
    fail("unknown final mode '" + s + "'");
}

std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<int>& labels,
                                                       std::size_t folds, const RngStream& rng) {
    if (folds < 2) fail("stratified_kfold: needs at least 2 folds");
    std::size_t pos = 0, neg = 0;
    for (int y : labels) (y ? pos : neg)++;
    if (pos < folds || neg < folds)
        fail("stratified_kfold: each class needs at least " + std::to_string(folds) +
             " samples (have " + std::to_string(pos) + " positive, " + std::to_string(neg) +
             " negative)");

    auto out = deal_folds(labels, folds, rng, 0);
    if (!folds_ok(out, labels)) {
        out = deal_folds(labels, folds, rng, 1);
        if (!folds_ok(out, labels))
            fail("stratified_kfold: a validation fold is single-class even after re-stratifying");
    }
    return out;
}

std::vector<LogisticModel> train_bagged(const Cohort& train,
                                        const std::vector<std::string>& features,
                                        std::size_t bags, const RngStream& rng) {
    if (bags == 0) fail("train_bagged: bags must be >= 1");
    const std::vector<int> labels = train.labels();
    const Eigen::MatrixXd X_full = feature_matrix(train, features);
    const Eigen::VectorXd y_full = label_vector(train);

    std::vector<LogisticModel> members;
    members.reserve(bags);
    for (std::size_t b = 0; b < bags; ++b) {
        RngStream stream = rng.child(kBagTag, b, 0);
        std::vector<std::size_t> rows = bootstrap_indices(labels, stream);

        Eigen::MatrixXd X(rows.size(), X_full.cols());
        Eigen::VectorXd y(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            X.row(static_cast<Eigen::Index>(i)) = X_full.row(static_cast<Eigen::Index>(rows[i]));
            y(static_cast<Eigen::Index>(i)) = y_full(static_cast<Eigen::Index>(rows[i]));
        }
        members.push_back(fit_logistic(X, y, features));
    }
    return members;
}

PredictionStats ensemble_stats(const std::vector<LogisticModel>& members,
                               std::span<const double> x) {
    if (members.empty()) fail("ensemble_stats: no members");
    PredictionStats stats;
    stats.member_probs.reserve(members.size());
    for (const auto& m : members) {
        if (m.coefficients.size() != x.size())
            fail("ensemble_stats: sample has " + std::to_string(x.size()) +
                 " features, member expects " + std::to_string(m.coefficients.size()));
        stats.member_probs.push_back(m.predict_proba(x));
    }
    double sum = 0.0;
    for (double p : stats.member_probs) sum += p;
    stats.mean = sum / static_cast<double>(members.size());
    if (members.size() > 1) {
        double ss = 0.0;
        for (double p : stats.member_probs) ss += (p - stats.mean) * (p - stats.mean);
        stats.sd = std::sqrt(ss / static_cast<double>(members.size() - 1));
    }
    return stats;
}

Eigen::MatrixXd member_probabilities(const std::vector<LogisticModel>& members,
                                     const Eigen::MatrixXd& X) {
    Eigen::MatrixXd probs(X.rows(), static_cast<Eigen::Index>(members.size()));
    std::vector<double> row(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(i, j);
        for (std::size_t m = 0; m < members.size(); ++m)
            probs(i, static_cast<Eigen::Index>(m)) = members[m].predict_proba(row);
    }
    return probs;
}

PredictionStats EnsembleModel::predict(std::span<const double> x) const {
    return ensemble_stats(members, x);
}

PredictionStats EnsembleModel::predict(const Cohort& cohort, std::size_t row) const {
    std::vector<double> x(feature_names.size());
    for (std::size_t k = 0; k < feature_names.size(); ++k) {
        auto idx = cohort.schema().index_of(feature_names[k]);
        if (!idx) fail("ensemble predict: feature '" + feature_names[k] + "' missing from data");
        double v = cohort.value(row, *idx);
        if (std::isnan(v))
            fail("ensemble predict: missing value in '" + feature_names[k] + "' for sample '" +
                 cohort.sample(row).id + "'");
        x[k] = v;
    }
    return ensemble_stats(members, x);
}

EnsembleModel train_ensemble_cv(const Cohort& train, const std::vector<std::string>& features,
                                const CvOptions& options, const RngStream& rng, StageLabel label,
                                CvDiagnostics* diagnostics) {
    const std::vector<int> labels = train.labels();
    auto folds = stratified_kfold(labels, options.folds, rng.child(kFoldTag));

    std::vector<std::vector<LogisticModel>> fold_members(folds.size());
    std::vector<double> fold_auc(folds.size());
    std::vector<YoudenResult> fold_youden(folds.size());
    if (diagnostics) diagnostics->folds.assign(folds.size(), {});

    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<char> in_val(train.size(), 0);
        for (std::size_t i : folds[f]) in_val[i] = 1;
        std::vector<std::size_t> train_rows;
        train_rows.reserve(train.size() - folds[f].size());
        for (std::size_t i = 0; i < train.size(); ++i)
            if (!in_val[i]) train_rows.push_back(i);

        Cohort fold_train = train.select_rows(train_rows);
        fold_members[f] = train_bagged(fold_train, features, options.bags, rng.child(kBagTag, f));

        const Eigen::MatrixXd X_val = feature_matrix(train, features, folds[f]);
        const Eigen::MatrixXd probs = member_probabilities(fold_members[f], X_val);

        std::vector<double> scores(folds[f].size());
        std::vector<int> val_labels(folds[f].size());
        for (std::size_t i = 0; i < folds[f].size(); ++i) {
            double sum = 0.0;
            for (Eigen::Index m = 0; m < probs.cols(); ++m)
                sum += probs(static_cast<Eigen::Index>(i), m);
            scores[i] = sum / static_cast<double>(probs.cols());
            val_labels[i] = labels[folds[f][i]];
        }

        RocCurve roc = roc_points(scores, val_labels);
        fold_auc[f] = auc_trapezoid(roc);
        fold_youden[f] = youden_best(roc);

        if (diagnostics) {
            auto& d = diagnostics->folds[f];
            d.auc = fold_auc[f];
            d.threshold = fold_youden[f].threshold;
            d.validation_scores = scores;
            d.validation_labels = val_labels;
        }
    }

    std::size_t best = 0;
    for (std::size_t f = 1; f < folds.size(); ++f)
        if (fold_auc[f] > fold_auc[best]) best = f;
    if (diagnostics) diagnostics->selected_fold = best;

    EnsembleModel model;
    model.threshold = fold_youden[best].threshold;
    model.feature_names = features;
    model.stage_label = label;
    model.provenance = {best, fold_auc[best]};
    if (options.final_mode == FinalMode::best_fold)
        model.members = std::move(fold_members[best]);
    else
        model.members = train_bagged(train, features, options.bags, rng.child(kRefitTag));
    return model;
}

nlohmann::json logistic_to_json(const LogisticModel& model) {
    return nlohmann::json{{"intercept", model.intercept},
                          {"coefficients", model.coefficients},
                          {"feature_names", model.feature_names},
                          {"converged", model.converged},
                          {"iterations_used", model.iterations_used},
                          {"final_log_likelihood", model.final_log_likelihood}};
}

LogisticModel logistic_from_json(const nlohmann::json& doc) {
    LogisticModel model;
    model.intercept = doc.at("intercept").get<double>();
    model.coefficients = doc.at("coefficients").get<std::vector<double>>();
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    model.converged = doc.at("converged").get<bool>();
    model.iterations_used = doc.at("iterations_used").get<int>();
    model.final_log_likelihood = doc.at("final_log_likelihood").get<double>();
    if (model.coefficients.size() != model.feature_names.size())
        fail("logistic model document: coefficient/name count mismatch");
    return model;
}

nlohmann::json ensemble_to_json(const EnsembleModel& model) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : model.members) members.push_back(logistic_to_json(m));
    return nlohmann::json{{"stage_label", to_string(model.stage_label)},
                          {"feature_names", model.feature_names},
                          {"threshold", model.threshold},
                          {"provenance",
                           {{"fold_index", model.provenance.fold_index},
                            {"fold_auc", model.provenance.fold_auc}}},
                          {"members", std::move(members)}};
}

EnsembleModel ensemble_from_json(const nlohmann::json& doc) {
    EnsembleModel model;
    model.stage_label = stage_label_from_string(doc.at("stage_label").get<std::string>());
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    model.threshold = doc.at("threshold").get<double>();
    model.provenance.fold_index = doc.at("provenance").at("fold_index").get<std::size_t>();
    model.provenance.fold_auc = doc.at("provenance").at("fold_auc").get<double>();
    for (const auto& m : doc.at("members")) model.members.push_back(logistic_from_json(m));
    if (model.members.empty()) fail("ensemble document: no members");
    for (const auto& m : model.members)
        if (m.feature_names != model.feature_names)
            fail("ensemble document: member feature list differs from the ensemble's");
    return model;
}

} // namespace staged
