#include "stagedrisk/config.hpp"

#include <fstream>
#include <stdexcept>

namespace staged {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

nlohmann::json schema_to_json(const FeatureSchema& schema) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& f : schema.entries())
        out.push_back({{"name", f.name},
                       {"kind", to_string(f.kind)},
                       {"stage", to_string(f.stage)}});
    return out;
}

FeatureSchema schema_from_json(const nlohmann::json& doc) {
    std::vector<FeatureSpec> specs;
    for (const auto& f : doc) {
        FeatureSpec spec;
        spec.name = f.at("name").get<std::string>();
        spec.kind = feature_kind_from_string(f.value("kind", "numeric"));
        spec.stage = stage_tag_from_string(f.value("stage", "clinical"));
        specs.push_back(std::move(spec));
    }
    return FeatureSchema(std::move(specs));
}

nlohmann::json columns_to_json(const LoadOptions& columns) {
    nlohmann::json bands = nlohmann::json::array();
    for (const auto& [lo, hi] : columns.age_bands) bands.push_back({lo, hi});
    return nlohmann::json{{"outcome", columns.outcome_col}, {"id", columns.id_col},
                          {"sex", columns.sex_col},         {"age", columns.age_col},
                          {"age_band", columns.age_band_col}, {"race", columns.race_col},
                          {"age_bands", std::move(bands)}};
}

LoadOptions columns_from_json(const nlohmann::json& doc) {
    LoadOptions columns;
    columns.outcome_col = doc.value("outcome", "outcome");
    columns.id_col = doc.value("id", "");
    columns.sex_col = doc.value("sex", "");
    columns.age_col = doc.value("age", "");
    columns.age_band_col = doc.value("age_band", "");
    columns.race_col = doc.value("race", "");
    if (doc.contains("age_bands"))
        for (const auto& band : doc.at("age_bands")) {
            if (!band.is_array() || band.size() != 2)
                fail("config: each age band must be a [low, high] pair");
            columns.age_bands.emplace_back(band[0].get<double>(), band[1].get<double>());
        }
    return columns;
}

} // namespace

nlohmann::json config_to_json(const RunConfig& c) {
    return nlohmann::json{{"seed", c.seed},
                          {"runs", c.runs},
                          {"folds", c.folds},
                          {"bags", c.bags},
                          {"z_cutoff", c.z_cutoff},
                          {"train_frac", c.train_frac},
                          {"k_stage1", c.k_stage1},
                          {"k_stage2", c.k_stage2},
                          {"rfe_iterations", c.rfe_iterations},
                          {"corr_cutoff", c.corr_cutoff},
                          {"missing_cutoff", c.missing_cutoff},
                          {"nzv_freq_ratio", c.nzv_freq_ratio},
                          {"nzv_unique_frac", c.nzv_unique_frac},
                          {"spatial_sign", c.spatial_sign},
                          {"t_value_features", c.t_value_features},
                          {"final_mode", to_string(c.final_mode)},
                          {"merged_score", to_string(c.merged_score)},
                          {"threads", c.threads},
                          {"input_csv", c.input_csv},
                          {"external_csv", c.external_csv},
                          {"out_dir", c.out_dir},
                          {"features", schema_to_json(c.schema)},
                          {"columns", columns_to_json(c.columns)},
                          {"exclude_features", c.exclude_features},
                          {"clinical_features", c.clinical_features},
                          {"stage2_features", c.stage2_features}};
}

RunConfig config_from_json(const nlohmann::json& doc) {
    RunConfig c;
    c.seed = doc.value("seed", c.seed);
    c.runs = doc.value("runs", c.runs);
    c.folds = doc.value("folds", c.folds);
    c.bags = doc.value("bags", c.bags);
    c.z_cutoff = doc.value("z_cutoff", c.z_cutoff);
    c.train_frac = doc.value("train_frac", c.train_frac);
    c.k_stage1 = doc.value("k_stage1", c.k_stage1);
    c.k_stage2 = doc.value("k_stage2", c.k_stage2);
    c.rfe_iterations = doc.value("rfe_iterations", c.rfe_iterations);
    c.corr_cutoff = doc.value("corr_cutoff", c.corr_cutoff);
    c.missing_cutoff = doc.value("missing_cutoff", c.missing_cutoff);
    c.nzv_freq_ratio = doc.value("nzv_freq_ratio", c.nzv_freq_ratio);
    c.nzv_unique_frac = doc.value("nzv_unique_frac", c.nzv_unique_frac);
    c.spatial_sign = doc.value("spatial_sign", c.spatial_sign);
    if (doc.contains("t_value_features"))
        c.t_value_features = doc.at("t_value_features").get<std::vector<std::string>>();
    c.final_mode = final_mode_from_string(doc.value("final_mode", to_string(c.final_mode)));
    c.merged_score =
        merged_score_mode_from_string(doc.value("merged_score", to_string(c.merged_score)));
    c.threads = doc.value("threads", c.threads);
    c.input_csv = doc.value("input_csv", c.input_csv);
    c.external_csv = doc.value("external_csv", c.external_csv);
    c.out_dir = doc.value("out_dir", c.out_dir);
    if (doc.contains("features")) c.schema = schema_from_json(doc.at("features"));
    if (doc.contains("columns")) c.columns = columns_from_json(doc.at("columns"));
    if (doc.contains("exclude_features"))
        c.exclude_features = doc.at("exclude_features").get<std::vector<std::string>>();
    if (doc.contains("clinical_features"))
        c.clinical_features = doc.at("clinical_features").get<std::vector<std::string>>();
    if (doc.contains("stage2_features"))
        c.stage2_features = doc.at("stage2_features").get<std::vector<std::string>>();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open config file '" + path.string() + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        fail("config file '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return config_from_json(doc);
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail("cannot write config file '" + path.string() + "'");
    out << config_to_json(config).dump(2) << '\n';
}

nlohmann::json pipeline_to_json(const PreprocessPipeline& pipeline) {
    nlohmann::json dropped = nlohmann::json::array();
    for (const auto& d : pipeline.dropped)
        dropped.push_back({{"name", d.name}, {"reason", to_string(d.reason)}});

    nlohmann::json doc{{"format", "preprocess-pipeline"},
                       {"version", 1},
                       {"dropped", std::move(dropped)},
                       {"row_drop_count", pipeline.row_drop_count},
                       {"scaled_features", pipeline.scaled_features},
                       {"center", pipeline.center},
                       {"scale", pipeline.scale},
                       {"spatial_sign", pipeline.spatial_sign_enabled}};
    if (pipeline.t_values) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& [key, entry] : pipeline.t_values->entries())
            entries.push_back({{"sex", key.sex},
                               {"age_band", key.age_band},
                               {"race", key.race},
                               {"feature", key.feature},
                               {"mean", entry.mean},
                               {"sd", entry.sd},
                               {"n", entry.n}});
        doc["t_values"] = {{"features", pipeline.t_values->features()},
                           {"entries", std::move(entries)}};
    }
    return doc;
}

PreprocessPipeline pipeline_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "preprocess-pipeline")
        fail("pipeline document: not a preprocess-pipeline file");
    if (doc.value("version", 0) != 1) fail("pipeline document: unsupported version");

    PreprocessPipeline pipeline;
    for (const auto& d : doc.at("dropped")) {
        const std::string reason = d.at("reason").get<std::string>();
        DropReason r;
        if (reason == "high-missing")
            r = DropReason::high_missing;
        else if (reason == "nzv")
            r = DropReason::nzv;
        else if (reason == "correlated")
            r = DropReason::correlated;
        else
            fail("pipeline document: unknown drop reason '" + reason + "'");
        pipeline.dropped.push_back({d.at("name").get<std::string>(), r});
    }
    pipeline.row_drop_count = doc.value("row_drop_count", std::size_t{0});
    pipeline.scaled_features = doc.at("scaled_features").get<std::vector<std::string>>();
    pipeline.center = doc.at("center").get<std::vector<double>>();
    pipeline.scale = doc.at("scale").get<std::vector<double>>();
    pipeline.spatial_sign_enabled = doc.value("spatial_sign", true);
    if (pipeline.center.size() != pipeline.scaled_features.size() ||
        pipeline.scale.size() != pipeline.scaled_features.size())
        fail("pipeline document: center/scale length mismatch");
    if (doc.contains("t_values")) {
        pipeline.t_values = TValueTable::restore(
            doc.at("t_values").at("features").get<std::vector<std::string>>(), [&] {
                std::vector<std::tuple<TValueTable::Key, TValueTable::Entry>> entries;
                for (const auto& e : doc.at("t_values").at("entries"))
                    entries.emplace_back(
                        TValueTable::Key{e.at("sex").get<std::string>(),
                                         e.at("age_band").get<std::string>(),
                                         e.at("race").get<std::string>(),
                                         e.at("feature").get<std::string>()},
                        TValueTable::Entry{e.at("mean").get<double>(), e.at("sd").get<double>(),
                                           e.at("n").get<std::size_t>()});
                return entries;
            }());
    }
    return pipeline;
}

} // namespace staged
