#pragma once

#include "stagedrisk/cascade.hpp"
#include "stagedrisk/cohort.hpp"
#include "stagedrisk/preprocess.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace staged {

// Every experiment knob in one document. Defaults are the deployed
// configuration: 100 runs, 5 folds, 50 bags, z = 2, 80/20 split, top 7
// clinical / top 15 stage-2 features, |r| 0.83, 20% missingness cutoff.
struct RunConfig {
    std::uint64_t seed = 1;
    std::size_t runs = 100;
    std::size_t folds = 5;
    std::size_t bags = 50;
    double z_cutoff = 2.0;
    double train_frac = 0.8;
    std::size_t k_stage1 = 7;
    std::size_t k_stage2 = 15;
    std::size_t rfe_iterations = 100;
    double corr_cutoff = 0.83;
    double missing_cutoff = 0.20;
    double nzv_freq_ratio = 19.0;
    double nzv_unique_frac = 0.10;
    bool spatial_sign = true;
    std::vector<std::string> t_value_features;
    FinalMode final_mode = FinalMode::best_fold;
    MergedScoreMode merged_score = MergedScoreMode::raw;
    std::size_t threads = 1;

    std::string input_csv;
    std::string external_csv;
    std::string out_dir = ".";

    FeatureSchema schema;
    LoadOptions columns;
    std::vector<std::string> exclude_features;

    // Explicit per-stage feature lists; when empty the top-k RFE selection
    // runs inline.
    std::vector<std::string> clinical_features;
    std::vector<std::string> stage2_features;

    CascadeConfig cascade() const {
        return {folds, bags, z_cutoff, train_frac, final_mode, merged_score, threads};
    }
};

nlohmann::json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& doc);

RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& config, const std::filesystem::path& path);

nlohmann::json pipeline_to_json(const PreprocessPipeline& pipeline);
PreprocessPipeline pipeline_from_json(const nlohmann::json& doc);

} // namespace staged
