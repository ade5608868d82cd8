#pragma once

#include "stagedrisk/cohort.hpp"
#include "stagedrisk/glm.hpp"
#include "stagedrisk/rng.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace staged {

enum class StageLabel { clinical, clinical_imaging };

std::string to_string(StageLabel label);
StageLabel stage_label_from_string(const std::string& s);

// Mean and spread of the member predictions for one sample.
struct PredictionStats {
    double mean = 0.0;
    double sd = 0.0; // sample SD across members, n-1
    std::vector<double> member_probs;
};

struct FoldProvenance {
    std::size_t fold_index = 0;
    double fold_auc = 0.0;
};

// Bagged logistic ensemble deployed with the decision threshold selected on
// its cross-validation fold.
struct EnsembleModel {
    std::vector<LogisticModel> members;
    double threshold = 0.5;
    std::vector<std::string> feature_names;
    StageLabel stage_label = StageLabel::clinical;
    FoldProvenance provenance;

    PredictionStats predict(std::span<const double> x) const;
    PredictionStats predict(const Cohort& cohort, std::size_t row) const;
    bool classify(double mean_prob) const { return mean_prob >= threshold; }
};

// Whether the deployed members come from the best fold or from a refit of
// the full training set (threshold stays the best fold's either way).
enum class FinalMode { best_fold, refit_full };

std::string to_string(FinalMode mode);
FinalMode final_mode_from_string(const std::string& s);

struct CvOptions {
    std::size_t folds = 5;
    std::size_t bags = 50;
    FinalMode final_mode = FinalMode::best_fold;
};

// Per-fold validation material kept for consistency checks and reports.
struct CvDiagnostics {
    struct Fold {
        double auc = 0.0;
        double threshold = 0.0;
        std::vector<double> validation_scores;
        std::vector<int> validation_labels;
    };
    std::vector<Fold> folds;
    std::size_t selected_fold = 0;
};

// Validation index sets, one per fold, from per-class round-robin dealing
// after a seeded shuffle. Every fold sees both classes.
std::vector<std::vector<std::size_t>> stratified_kfold(const std::vector<int>& labels,
                                                       std::size_t folds, const RngStream& rng);

// `bags` logistic models, each fit on an independent bootstrap resample of
// the training rows. Deterministic given the stream.
std::vector<LogisticModel> train_bagged(const Cohort& train, const std::vector<std::string>& features,
                                        std::size_t bags, const RngStream& rng);

PredictionStats ensemble_stats(const std::vector<LogisticModel>& members,
                               std::span<const double> x);

// Per-sample member probabilities for a whole design matrix (row = sample,
// column = member). The bulk path used by the protocols.
Eigen::MatrixXd member_probabilities(const std::vector<LogisticModel>& members,
                                     const Eigen::MatrixXd& X);

// Stratified k-fold bagging: per fold, bag on the training part, score the
// validation part, and take the Youden threshold; the fold with the highest
// validation AUC supplies the deployed members and threshold (AUC ties go
// to the lowest fold index).
EnsembleModel train_ensemble_cv(const Cohort& train, const std::vector<std::string>& features,
                                const CvOptions& options, const RngStream& rng,
                                StageLabel label = StageLabel::clinical,
                                CvDiagnostics* diagnostics = nullptr);

nlohmann::json logistic_to_json(const LogisticModel& model);
LogisticModel logistic_from_json(const nlohmann::json& doc);

nlohmann::json ensemble_to_json(const EnsembleModel& model);
EnsembleModel ensemble_from_json(const nlohmann::json& doc);

} // namespace staged
