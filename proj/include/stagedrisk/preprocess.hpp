#pragma once

#include "stagedrisk/cohort.hpp"

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace staged {

enum class DropReason { high_missing, nzv, correlated };

std::string to_string(DropReason r);

struct DropRecord {
    std::string name;
    DropReason reason;
};

// Per-stratum reference statistics for the T-value standardization:
// mean and sample SD of the non-fracture subjects, per feature.
class TValueTable {
public:
    struct Key {
        std::string sex, age_band, race, feature;
        auto operator<=>(const Key&) const = default;
    };
    struct Entry {
        double mean = 0.0;
        double sd = 0.0;
        std::size_t n = 0;
    };

    static TValueTable fit(const Cohort& reference, const std::vector<std::string>& features);

    // Rebuilds a table from persisted entries.
    static TValueTable restore(std::vector<std::string> features,
                               const std::vector<std::tuple<Key, Entry>>& entries);

    const Entry& lookup(const Strata& strata, const std::string& feature) const;
    const std::map<Key, Entry>& entries() const { return entries_; }
    const std::vector<std::string>& features() const { return features_; }

private:
    std::map<Key, Entry> entries_;
    std::vector<std::string> features_;
};

// Fitted preprocessing state, replayable on new data. Fit order is fixed:
// high-missing filter, incomplete-row removal, optional T-value
// standardization, near-zero-variance filter, correlation filter, then
// center/scale + spatial sign on the numeric survivors.
struct PreprocessPipeline {
    std::vector<DropRecord> dropped;
    std::size_t row_drop_count = 0;
    std::vector<std::string> scaled_features; // numeric survivors, schema order
    std::vector<double> center;
    std::vector<double> scale;
    bool spatial_sign_enabled = true;
    std::optional<TValueTable> t_values;

    // Replays every fitted step on raw data with the training statistics.
    Cohort apply(const Cohort& raw) const;
};

struct PreprocessOptions {
    double missing_cutoff = 0.20;
    double nzv_freq_ratio = 19.0;
    double nzv_unique_frac = 0.10;
    double corr_cutoff = 0.83;
    bool spatial_sign = true;
    std::vector<std::string> t_value_features; // empty: no T-value step
};

// Features with missing fraction strictly greater than max_frac are removed.
std::pair<Cohort, std::vector<DropRecord>> drop_high_missing(const Cohort& cohort,
                                                             double max_frac = 0.20);

// Removes samples with any missing value among the surviving features.
// Throws if nothing survives.
std::pair<Cohort, std::size_t> drop_incomplete_rows(const Cohort& cohort);

// Drops zero-variance features, and features whose top-two frequency ratio
// is >= freq_ratio_cut while the distinct-value fraction is < unique_frac_cut.
std::pair<Cohort, std::vector<DropRecord>> nzv_filter(const Cohort& cohort,
                                                      double freq_ratio_cut = 19.0,
                                                      double unique_frac_cut = 0.10);

// Greedy pairwise decorrelation of the numeric features: while any pair has
// |Pearson r| > cutoff, drop (from the maximal pair) the feature with greater
// mean absolute correlation to the remaining features; ties break toward the
// lexicographically smaller survivor.
std::pair<Cohort, std::vector<DropRecord>> correlation_filter(const Cohort& cohort,
                                                              double cutoff = 0.83);

// Center/scale the numeric features by their training mean/SD, then divide
// each sample's numeric vector by its Euclidean norm (zero-norm vectors stay
// all-zero). Returns the transformed cohort plus a pipeline holding the
// fitted statistics.
std::pair<Cohort, PreprocessPipeline> fit_apply_spatial_sign(const Cohort& cohort);

// Standardizes the listed features of `target` against the (sex, age_band,
// race)-stratified non-fracture statistics of `reference`.
Cohort t_value_transform(const Cohort& target, const Cohort& reference,
                         const std::vector<std::string>& features);

Cohort apply_t_values(const Cohort& target, const TValueTable& table);

// Full fitted chain in the contract order; used by the prep command.
std::pair<Cohort, PreprocessPipeline> fit_pipeline(const Cohort& cohort,
                                                   const PreprocessOptions& options);

} // namespace staged
