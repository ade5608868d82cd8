#pragma once

#include "stagedrisk/cohort.hpp"
#include "stagedrisk/ensemble.hpp"
#include "stagedrisk/metrics.hpp"
#include "stagedrisk/rng.hpp"

#include "json.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace staged {

// Disagreement z-score of an ensemble prediction against its decision
// threshold: |mean - threshold| / sd. A zero-spread ensemble is perfectly
// certain (+inf) unless its mean sits exactly on the threshold (0).
double uncertainty_z(const PredictionStats& stats, double threshold);

// How the two stages' probabilities are pooled for the merged ROC: raw
// deciding-stage probabilities, or shifted so both stages share a common
// 0.5 reference (probability - threshold + 0.5).
enum class MergedScoreMode { raw, shifted };

std::string to_string(MergedScoreMode mode);
MergedScoreMode merged_score_mode_from_string(const std::string& s);

struct CascadeModel {
    EnsembleModel stage1; // clinical features
    EnsembleModel stage2; // clinical + imaging features
    double z_cutoff = 2.0;
};

struct CascadeConfig {
    std::size_t folds = 5;
    std::size_t bags = 50;
    double z_cutoff = 2.0;
    double train_frac = 0.8;
    FinalMode final_mode = FinalMode::best_fold;
    MergedScoreMode merged_score = MergedScoreMode::raw;
    std::size_t threads = 1;
};

struct CaseDecision {
    std::string id;
    int stage_used = 1; // 1 iff z >= z_cutoff
    double probability = 0.0;
    double z = 0.0;
    bool predicted = false;
};

// Raised when a sample routed to stage 2 lacks an imaging value: the
// workflow signal that a scan is required before the case can be decided.
struct NeedsImagingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CascadeReport {
    MetricSet overall;
    std::optional<double> stage1_accuracy; // absent when the stage saw no samples
    std::optional<double> stage2_accuracy;
    double stage1_fraction = 0.0;
    double stage2_fraction = 0.0;
    std::size_t n_uncertain = 0;
};

CascadeModel train_cascade(const Cohort& train, const std::vector<std::string>& clinical_features,
                           const std::vector<std::string>& stage2_features,
                           const CascadeConfig& config, const RngStream& rng);

CaseDecision cascade_predict(const CascadeModel& model, const Cohort& cohort, std::size_t row);

CascadeReport evaluate_cascade(const CascadeModel& model, const Cohort& test,
                               MergedScoreMode merged = MergedScoreMode::raw,
                               std::vector<CaseDecision>* decisions = nullptr);

// One ensemble deciding every sample by itself, on the same test set.
MetricSet evaluate_ensemble(const EnsembleModel& model, const Cohort& test);

// Bootstrap + k-fold protocol for a single ensemble family: per run,
// resample the cohort, run stratified k-fold CV with one logistic fit per
// fold, take each fold's Youden threshold and validation metrics, and
// average the folds. Runs are summarized as mean/SD.
MetricSummary protocol_single_ensemble(const Cohort& cohort, const std::vector<std::string>& features,
                                       std::size_t runs, std::size_t folds, const RngStream& rng,
                                       std::size_t threads = 1,
                                       std::vector<MetricSet>* per_run = nullptr);

struct TwoStageRun {
    CascadeReport cascade;
    MetricSet stage1_alone;
    MetricSet stage2_alone;
};

struct TwoStageSummary {
    MetricSummary overall;
    MetricSummary stage1_alone;
    MetricSummary stage2_alone;
    Stat stage1_accuracy, stage2_accuracy; // over the runs where defined
    std::size_t stage1_accuracy_runs = 0, stage2_accuracy_runs = 0;
    Stat stage1_fraction, stage2_fraction, n_uncertain;
    std::size_t runs = 0;
    std::vector<TwoStageRun> per_run;
};

// Per run: stratified train/test split, cascade training on the train
// part, evaluation on the test part (plus each stage alone for reference).
TwoStageSummary protocol_two_stage(const Cohort& cohort,
                                   const std::vector<std::string>& clinical_features,
                                   const std::vector<std::string>& stage2_features,
                                   std::size_t runs, const CascadeConfig& config,
                                   const RngStream& rng);

// Per run: stratified split of the internal cohort for training and
// threshold selection, evaluation on the full external cohort. Every model
// feature must exist in both schemas.
TwoStageSummary protocol_external(const Cohort& internal, const Cohort& external,
                                  const std::vector<std::string>& clinical_features,
                                  const std::vector<std::string>& stage2_features,
                                  std::size_t runs, const CascadeConfig& config,
                                  const RngStream& rng);

nlohmann::json cascade_to_json(const CascadeModel& model);
CascadeModel cascade_from_json(const nlohmann::json& doc);

} // namespace staged
