#pragma once

#include "stagedrisk/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace staged {

enum class FeatureKind { numeric, binary, categorical };
enum class StageTag { clinical, imaging };

std::string to_string(FeatureKind k);
std::string to_string(StageTag t);
FeatureKind feature_kind_from_string(std::string_view s);
StageTag stage_tag_from_string(std::string_view s);

struct FeatureSpec {
    std::string name;
    FeatureKind kind = FeatureKind::numeric;
    StageTag stage = StageTag::clinical;
};

// Ordered feature declaration. Names are unique; the outcome column is
// never part of the schema.
class FeatureSchema {
public:
    FeatureSchema() = default;
    explicit FeatureSchema(std::vector<FeatureSpec> entries);

    std::size_t size() const { return entries_.size(); }
    const FeatureSpec& at(std::size_t i) const { return entries_.at(i); }
    const std::vector<FeatureSpec>& entries() const { return entries_; }

    std::optional<std::size_t> index_of(std::string_view name) const;
    bool contains(std::string_view name) const { return index_of(name).has_value(); }

    std::vector<std::string> names() const;
    std::vector<std::string> names_with(StageTag tag) const;
    std::vector<std::string> numeric_names() const;

    // Schema restricted to `keep`, preserving this schema's order.
    FeatureSchema subset(const std::vector<std::string>& keep) const;

private:
    std::vector<FeatureSpec> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct Strata {
    std::string sex = "all";
    std::string age_band = "all";
    std::string race = "all";

    bool operator==(const Strata&) const = default;
};

// One subject. `features` is aligned to the cohort schema; NaN marks a
// missing value. `outcome` is 1 for the event (hip fracture), 0 otherwise.
struct Sample {
    std::string id;
    std::vector<double> features;
    int outcome = 0;
    Strata strata;
};

class Cohort {
public:
    Cohort() = default;
    Cohort(FeatureSchema schema, std::vector<Sample> samples);

    const FeatureSchema& schema() const { return schema_; }
    const std::vector<Sample>& samples() const { return samples_; }
    const Sample& sample(std::size_t i) const { return samples_.at(i); }

    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    std::size_t positives() const { return positives_; }
    std::size_t negatives() const { return negatives_; }

    double value(std::size_t row, std::size_t feature) const {
        return samples_[row].features[feature];
    }

    std::vector<int> labels() const;

    // New cohort with the same schema and the given rows (by index).
    Cohort select_rows(const std::vector<std::size_t>& rows) const;

    // New cohort keeping only the named features (schema order preserved).
    Cohort keep_features(const std::vector<std::string>& keep) const;

    // New cohort with the named features removed. Unknown names are ignored.
    Cohort drop_features(const std::vector<std::string>& drop) const;

private:
    FeatureSchema schema_;
    std::vector<Sample> samples_;
    std::size_t positives_ = 0;
    std::size_t negatives_ = 0;
};

struct LoadOptions {
    std::string outcome_col = "outcome";
    std::string id_col;       // empty: row number used as id
    std::string sex_col;      // empty: stratum defaults to "all"
    std::string age_col;      // numeric age, banded via age_bands
    std::string age_band_col; // pre-banded label column (takes precedence over age_col)
    std::string race_col;
    std::vector<std::pair<double, double>> age_bands; // inclusive [lo, hi]
};

struct LoadResult {
    Cohort cohort;
    std::size_t dropped_missing_outcome = 0;
};

// Reads a UTF-8, comma-separated file with a header row. Missing values are
// the empty string or the literal "NA". Rows with a missing outcome are
// dropped and counted. Malformed rows and non-numeric values in numeric
// columns raise std::runtime_error naming the line (and column).
LoadResult load_cohort(const std::filesystem::path& path, const FeatureSchema& schema,
                       const LoadOptions& options);

// Writes id, strata columns, features, and outcome. Doubles are printed
// with round-trip precision so rewriting is byte-stable.
void write_cohort_csv(const Cohort& cohort, const std::filesystem::path& path);

// Per class, round(count * train_frac) samples go to train (ties toward
// train). Deterministic given the seed. Throws if either class has < 2
// samples.
std::pair<Cohort, Cohort> stratified_split(const Cohort& cohort, double train_frac,
                                           std::uint64_t seed);

// Draws n indices with replacement; redraws (up to 100 times) if the result
// lacks either class. Shared by bootstrap_resample and the bagging trainer.
std::vector<std::size_t> bootstrap_indices(const std::vector<int>& labels, RngStream& rng);

Cohort bootstrap_resample(const Cohort& cohort, RngStream& rng);

struct SyntheticSpec {
    std::size_t n = 1000;
    double prevalence = 0.10;
    std::vector<std::pair<std::string, double>> clinical_effects;
    std::vector<std::pair<std::string, double>> imaging_effects;
    double borderline_lo = -1.0; // latent clinical-score interval where the
    double borderline_hi = 1.0;  // imaging term is switched on
    std::uint64_t seed = 1;
};

// Latent score = clinical linear term everywhere, plus the imaging linear
// term when the clinical score falls inside the borderline band. Outcomes
// are Bernoulli(sigmoid(score + offset)) with the offset solved so the
// realized positive count lands within 10% (relative) of n * prevalence.
Cohort generate_synthetic(const SyntheticSpec& spec);

} // namespace staged
