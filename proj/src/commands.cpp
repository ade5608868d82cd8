#include "stagedrisk/commands.hpp"

#include "stagedrisk/cascade.hpp"
#include "stagedrisk/featsel.hpp"
#include "stagedrisk/preprocess.hpp"
#include "stagedrisk/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace staged {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kRfeStage1Tag = 0x5e1;
constexpr std::uint64_t kRfeStage2Tag = 0x5e2;
constexpr std::uint64_t kProtocolTag = 0x99;
constexpr std::uint64_t kDeployTag = 0xde;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::vector<std::string> csv_header(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("'" + path.string() + "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return split_line(line);
}

// Config schema minus excluded features, restricted to the CSV's columns.
// Features the file lacks are reported, not fatal: prepped inputs have
// already dropped some of them.
FeatureSchema effective_schema(const RunConfig& config, const fs::path& csv,
                               std::ostream& out) {
    if (config.schema.size() == 0)
        throw std::runtime_error("config has no feature declarations ('features')");
    std::vector<std::string> header = csv_header(csv);
    auto in_header = [&](const std::string& name) {
        return std::find(header.begin(), header.end(), name) != header.end();
    };
    auto excluded = [&](const std::string& name) {
        return std::find(config.exclude_features.begin(), config.exclude_features.end(), name) !=
               config.exclude_features.end();
    };

    std::vector<std::string> keep, absent;
    for (const auto& e : config.schema.entries()) {
        if (excluded(e.name)) continue;
        (in_header(e.name) ? keep : absent).push_back(e.name);
    }
    if (!absent.empty()) {
        out << "note: " << absent.size() << " configured feature(s) not in '" << csv.string()
            << "':";
        for (const auto& n : absent) out << ' ' << n;
        out << '\n';
    }
    if (keep.empty())
        throw std::runtime_error("no configured features present in '" + csv.string() + "'");
    return config.schema.subset(keep);
}

Cohort load_input(const RunConfig& config, const fs::path& csv, const FeatureSchema& schema,
                  std::ostream& out) {
    LoadResult res = load_cohort(csv, schema, config.columns);
    if (res.dropped_missing_outcome > 0)
        out << "note: dropped " << res.dropped_missing_outcome << " row(s) with missing outcome\n";
    return std::move(res.cohort);
}

// Explicit list from the config when given, otherwise inline top-k RFE
// over the candidates.
std::vector<std::string> stage_features(const Cohort& cohort,
                                        const std::vector<std::string>& explicit_list,
                                        const std::vector<std::string>& candidates, std::size_t k,
                                        std::size_t rfe_iterations, const RngStream& rng,
                                        const char* stage_name, std::ostream& out) {
    if (!explicit_list.empty()) {
        for (const auto& f : explicit_list)
            if (!cohort.schema().contains(f))
                throw std::runtime_error(std::string(stage_name) + " feature '" + f +
                                         "' is not in the loaded data");
        return explicit_list;
    }
    if (candidates.empty())
        throw std::runtime_error(std::string("no candidate features for ") + stage_name);
    if (k >= candidates.size()) {
        if (k > candidates.size())
            out << "note: " << stage_name << " k = " << k << " clamped to the "
                << candidates.size() << " available candidates\n";
        return candidates;
    }
    RankTable table = rfe_rank(cohort, candidates, {rfe_iterations}, rng);
    return select_top_k(table, k);
}

void write_decision_csv_row(std::ofstream& out, const CaseDecision& d) {
    out << d.id << ',' << d.stage_used << ',' << format_double(d.z) << ','
        << format_double(d.probability) << ',' << (d.predicted ? 1 : 0) << '\n';
}

} // namespace

SyntheticSpec default_synthetic_spec(std::size_t n, double prevalence, double borderline_lo,
                                     double borderline_hi, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.n = n;
    spec.prevalence = prevalence;
    spec.clinical_effects = {{"age_idx", 1.0}, {"bmi", 0.8},   {"grip", 0.6},
                             {"gait", 0.5},    {"falls", 0.4}, {"smoke", 0.3}};
    spec.imaging_effects = {{"dxa_hip", 2.0}, {"dxa_spine", 1.5}, {"dxa_radius", 1.0}};
    spec.borderline_lo = borderline_lo;
    spec.borderline_hi = borderline_hi;
    spec.seed = seed;
    return spec;
}

FeatureSchema default_synthetic_schema() {
    SyntheticSpec spec = default_synthetic_spec(1, 0.1, -1.0, 1.0, 1);
    std::vector<FeatureSpec> specs;
    for (const auto& [name, effect] : spec.clinical_effects)
        specs.push_back({name, FeatureKind::numeric, StageTag::clinical});
    for (const auto& [name, effect] : spec.imaging_effects)
        specs.push_back({name, FeatureKind::numeric, StageTag::imaging});
    return FeatureSchema(std::move(specs));
}

LoadOptions default_synthetic_columns() {
    LoadOptions columns;
    columns.outcome_col = "outcome";
    columns.id_col = "id";
    columns.sex_col = "sex";
    columns.age_band_col = "age_band";
    columns.race_col = "race";
    return columns;
}

int cmd_prep(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        if (config.input_csv.empty()) throw std::runtime_error("no input_csv configured");
        FeatureSchema schema = effective_schema(config, config.input_csv, out);
        Cohort cohort = load_input(config, config.input_csv, schema, out);

        PreprocessOptions options;
        options.missing_cutoff = config.missing_cutoff;
        options.nzv_freq_ratio = config.nzv_freq_ratio;
        options.nzv_unique_frac = config.nzv_unique_frac;
        options.corr_cutoff = config.corr_cutoff;
        options.spatial_sign = config.spatial_sign;
        options.t_value_features = config.t_value_features;

        auto [prepped, pipeline] = fit_pipeline(cohort, options);

        fs::create_directories(config.out_dir);
        fs::path cohort_path = fs::path(config.out_dir) / "prepped.csv";
        fs::path pipeline_path = fs::path(config.out_dir) / "pipeline.json";
        write_cohort_csv(prepped, cohort_path);
        write_json(pipeline_to_json(pipeline), pipeline_path);

        out << "rows: " << cohort.size() << " -> " << prepped.size() << " ("
            << pipeline.row_drop_count << " incomplete dropped)\n";
        out << "features: " << cohort.schema().size() << " -> " << prepped.schema().size()
            << '\n';
        for (const auto& d : pipeline.dropped)
            out << "  dropped " << d.name << " (" << to_string(d.reason) << ")\n";
        out << "wrote " << cohort_path.string() << '\n';
        out << "wrote " << pipeline_path.string() << '\n';
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

int cmd_run(const RunConfig& config, const std::string& protocol, std::ostream& out,
            std::ostream& err) {
    try {
        if (config.input_csv.empty()) throw std::runtime_error("no input_csv configured");
        FeatureSchema schema = effective_schema(config, config.input_csv, out);
        Cohort cohort = load_input(config, config.input_csv, schema, out);

        RngStream root(config.seed);
        std::vector<std::string> clinical_candidates = schema.names_with(StageTag::clinical);
        std::vector<std::string> all_candidates = schema.names();

        std::vector<std::string> clinical =
            stage_features(cohort, config.clinical_features, clinical_candidates,
                           config.k_stage1, config.rfe_iterations, root.child(kRfeStage1Tag),
                           "stage-1", out);

        fs::create_directories(config.out_dir);

        if (protocol == "single") {
            std::vector<MetricSet> per_run;
            MetricSummary summary =
                protocol_single_ensemble(cohort, clinical, config.runs, config.folds,
                                         root.child(kProtocolTag), config.threads, &per_run);
            fs::path report_path = fs::path(config.out_dir) / "report_single.json";
            write_json(single_protocol_report(config, clinical, summary, per_run), report_path);
            out << "protocol: single  (" << clinical.size() << " features)\n";
            out << format_single_table(summary);
            out << "wrote " << report_path.string() << '\n';
            return 0;
        }

        std::vector<std::string> stage2 =
            stage_features(cohort, config.stage2_features, all_candidates, config.k_stage2,
                           config.rfe_iterations, root.child(kRfeStage2Tag), "stage-2", out);

        TwoStageSummary summary;
        if (protocol == "two-stage") {
            summary = protocol_two_stage(cohort, clinical, stage2, config.runs, config.cascade(),
                                         root.child(kProtocolTag));
        } else if (protocol == "external") {
            if (config.external_csv.empty())
                throw std::runtime_error("external protocol needs external_csv");
            FeatureSchema ext_schema = effective_schema(config, config.external_csv, out);
            Cohort external = load_input(config, config.external_csv, ext_schema, out);
            summary = protocol_external(cohort, external, clinical, stage2, config.runs,
                                        config.cascade(), root.child(kProtocolTag));
        } else {
            throw std::runtime_error("unknown protocol '" + protocol +
                                     "' (expected single, two-stage, or external)");
        }

        fs::path report_path = fs::path(config.out_dir) / ("report_" + protocol + ".json");
        write_json(two_stage_protocol_report(config, protocol, clinical, stage2, summary),
                   report_path);

        CascadeModel deployed =
            train_cascade(cohort, clinical, stage2, config.cascade(), root.child(kDeployTag));
        fs::path model_path = fs::path(config.out_dir) / "model_two_stage.json";
        write_json(cascade_to_json(deployed), model_path);

        out << "protocol: " << protocol << "  (stage 1: " << clinical.size()
            << " features, stage 2: " << stage2.size() << ")\n";
        out << format_two_stage_table(summary);
        out << "wrote " << report_path.string() << '\n';
        out << "wrote " << model_path.string() << '\n';
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

int cmd_score(const std::string& model_path, const std::string& input_csv,
              const std::string& output_csv, const std::string& id_col, std::ostream& out,
              std::ostream& err) {
    try {
        CascadeModel model;
        try {
            model = cascade_from_json(read_json(model_path));
        } catch (const std::exception& e) {
            throw std::runtime_error("cannot load model '" + model_path + "': " + e.what());
        }

        // Scoring schema: every model feature, whether or not the file has
        // the column; absent columns read as missing.
        std::vector<FeatureSpec> specs;
        for (const auto& name : model.stage1.feature_names)
            specs.push_back({name, FeatureKind::numeric, StageTag::clinical});
        for (const auto& name : model.stage2.feature_names) {
            bool in_stage1 =
                std::find(model.stage1.feature_names.begin(), model.stage1.feature_names.end(),
                          name) != model.stage1.feature_names.end();
            if (!in_stage1) specs.push_back({name, FeatureKind::numeric, StageTag::imaging});
        }
        FeatureSchema schema(std::move(specs));

        std::ifstream in(input_csv);
        if (!in) throw std::runtime_error("cannot open '" + input_csv + "'");
        std::string line;
        if (!std::getline(in, line))
            throw std::runtime_error("'" + input_csv + "': empty file");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> header = split_line(line);

        auto find_col = [&](const std::string& name) -> std::ptrdiff_t {
            auto it = std::find(header.begin(), header.end(), name);
            return it == header.end() ? -1 : it - header.begin();
        };
        std::ptrdiff_t id_idx = find_col(id_col);
        std::vector<std::ptrdiff_t> cols;
        for (const auto& e : schema.entries()) cols.push_back(find_col(e.name));

        std::vector<Sample> samples;
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::vector<std::string> fields = split_line(line);
            if (fields.size() != header.size())
                throw std::runtime_error("parse error at line " + std::to_string(line_no) +
                                         ": expected " + std::to_string(header.size()) +
                                         " fields, got " + std::to_string(fields.size()));
            Sample s;
            s.id = id_idx >= 0 ? fields[static_cast<std::size_t>(id_idx)]
                               : std::to_string(line_no - 1);
            for (std::size_t k = 0; k < cols.size(); ++k) {
                const std::string missing = "";
                std::string tok =
                    cols[k] >= 0 ? fields[static_cast<std::size_t>(cols[k])] : missing;
                if (tok.empty() || tok == "NA") {
                    s.features.push_back(std::numeric_limits<double>::quiet_NaN());
                } else {
                    try {
                        std::size_t used = 0;
                        double v = std::stod(tok, &used);
                        if (used != tok.size()) throw std::invalid_argument(tok);
                        s.features.push_back(v);
                    } catch (const std::exception&) {
                        throw std::runtime_error("parse error: non-numeric value '" + tok +
                                                 "' in column '" + schema.at(k).name +
                                                 "' at line " + std::to_string(line_no));
                    }
                }
            }
            samples.push_back(std::move(s));
        }
        Cohort cohort(schema, std::move(samples));

        std::ofstream csv(output_csv);
        if (!csv) throw std::runtime_error("cannot write '" + output_csv + "'");
        csv << "id,stage_used,z,probability,predicted\n";
        std::size_t referred = 0;
        for (std::size_t i = 0; i < cohort.size(); ++i) {
            try {
                write_decision_csv_row(csv, cascade_predict(model, cohort, i));
            } catch (const NeedsImagingError&) {
                PredictionStats stats = model.stage1.predict(cohort, i);
                double z = uncertainty_z(stats, model.stage1.threshold);
                csv << cohort.sample(i).id << ",needs-imaging," << format_double(z) << ",,\n";
                ++referred;
            }
        }
        if (!csv) throw std::runtime_error("write failed for '" + output_csv + "'");

        out << "scored " << cohort.size() << " sample(s), " << referred
            << " need(s) imaging -> " << output_csv << '\n';
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
    try {
        SyntheticSpec spec = default_synthetic_spec(args.n, args.prevalence, args.borderline_lo,
                                                    args.borderline_hi, args.seed);
        Cohort cohort = generate_synthetic(spec);
        write_cohort_csv(cohort, args.out_csv);
        out << "wrote " << cohort.size() << " samples (" << cohort.positives()
            << " positive) to " << args.out_csv << '\n';
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace staged
