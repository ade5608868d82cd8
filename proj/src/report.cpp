#include "stagedrisk/report.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace staged {

namespace {

std::string timestamp_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json metric_set_json(const MetricSet& m) {
    return {{"auc", m.auc},
            {"accuracy", m.accuracy},
            {"sensitivity", m.sensitivity},
            {"specificity", m.specificity}};
}

nlohmann::json stat_json(const Stat& s) { return {{"mean", s.mean}, {"sd", s.sd}}; }

nlohmann::json summary_json(const MetricSummary& s) {
    return {{"auc", stat_json(s.auc)},
            {"accuracy", stat_json(s.accuracy)},
            {"sensitivity", stat_json(s.sensitivity)},
            {"specificity", stat_json(s.specificity)},
            {"runs", s.runs}};
}

nlohmann::json provenance_json(const RunConfig& config) {
    return {{"tool_version", kToolVersion},
            {"seed", config.seed},
            {"created_at", timestamp_utc()}};
}

void print_stat_row(std::ostringstream& out, const std::string& name, const Stat& s) {
    out << "  " << std::left << std::setw(22) << name << std::right << std::setw(8) << s.mean
        << std::setw(8) << s.sd << '\n';
}

void print_summary_rows(std::ostringstream& out, const MetricSummary& s) {
    print_stat_row(out, "auc", s.auc);
    print_stat_row(out, "accuracy", s.accuracy);
    print_stat_row(out, "sensitivity", s.sensitivity);
    print_stat_row(out, "specificity", s.specificity);
}

} // namespace

nlohmann::json single_protocol_report(const RunConfig& config,
                                      const std::vector<std::string>& features,
                                      const MetricSummary& summary,
                                      const std::vector<MetricSet>& per_run) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : per_run) runs.push_back(metric_set_json(r));
    return nlohmann::json{{"format", "report"},
                          {"version", 1},
                          {"protocol", "single"},
                          {"config", config_to_json(config)},
                          {"features", features},
                          {"provenance", provenance_json(config)},
                          {"runs", std::move(runs)},
                          {"summary", summary_json(summary)}};
}

nlohmann::json two_stage_protocol_report(const RunConfig& config, const std::string& protocol,
                                         const std::vector<std::string>& clinical_features,
                                         const std::vector<std::string>& stage2_features,
                                         const TwoStageSummary& summary) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : summary.per_run) {
        nlohmann::json row{{"cascade", metric_set_json(r.cascade.overall)},
                           {"stage1_alone", metric_set_json(r.stage1_alone)},
                           {"stage2_alone", metric_set_json(r.stage2_alone)},
                           {"stage1_fraction", r.cascade.stage1_fraction},
                           {"stage2_fraction", r.cascade.stage2_fraction},
                           {"n_uncertain", r.cascade.n_uncertain}};
        row["stage1_accuracy"] = r.cascade.stage1_accuracy
                                     ? nlohmann::json(*r.cascade.stage1_accuracy)
                                     : nlohmann::json(nullptr);
        row["stage2_accuracy"] = r.cascade.stage2_accuracy
                                     ? nlohmann::json(*r.cascade.stage2_accuracy)
                                     : nlohmann::json(nullptr);
        runs.push_back(std::move(row));
    }

    nlohmann::json summary_doc{
        {"cascade", summary_json(summary.overall)},
        {"stage1_alone", summary_json(summary.stage1_alone)},
        {"stage2_alone", summary_json(summary.stage2_alone)},
        {"stage1_accuracy",
         {{"mean", summary.stage1_accuracy.mean},
          {"sd", summary.stage1_accuracy.sd},
          {"runs", summary.stage1_accuracy_runs}}},
        {"stage2_accuracy",
         {{"mean", summary.stage2_accuracy.mean},
          {"sd", summary.stage2_accuracy.sd},
          {"runs", summary.stage2_accuracy_runs}}},
        {"stage1_fraction", stat_json(summary.stage1_fraction)},
        {"stage2_fraction", stat_json(summary.stage2_fraction)},
        {"n_uncertain", stat_json(summary.n_uncertain)}};

    return nlohmann::json{{"format", "report"},
                          {"version", 1},
                          {"protocol", protocol},
                          {"config", config_to_json(config)},
                          {"clinical_features", clinical_features},
                          {"stage2_features", stage2_features},
                          {"provenance", provenance_json(config)},
                          {"runs", std::move(runs)},
                          {"summary", std::move(summary_doc)}};
}

void write_json(const nlohmann::json& doc, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << doc.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("'" + path.string() + "' is not valid JSON: " + e.what());
    }
    return doc;
}

std::string format_single_table(const MetricSummary& summary) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3);
    out << "  " << std::left << std::setw(22) << "metric" << std::right << std::setw(8) << "mean"
        << std::setw(8) << "sd" << '\n';
    print_summary_rows(out, summary);
    out << "  runs: " << summary.runs << '\n';
    return out.str();
}

std::string format_two_stage_table(const TwoStageSummary& summary) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3);
    out << "  " << std::left << std::setw(22) << "metric" << std::right << std::setw(8) << "mean"
        << std::setw(8) << "sd" << '\n';
    out << "two-stage\n";
    print_summary_rows(out, summary.overall);
    print_stat_row(out, "stage-1 fraction", summary.stage1_fraction);
    print_stat_row(out, "stage-2 fraction", summary.stage2_fraction);
    print_stat_row(out, "stage-1 accuracy", summary.stage1_accuracy);
    print_stat_row(out, "stage-2 accuracy", summary.stage2_accuracy);
    print_stat_row(out, "n uncertain", summary.n_uncertain);
    out << "stage 1 alone\n";
    print_summary_rows(out, summary.stage1_alone);
    out << "stage 2 alone\n";
    print_summary_rows(out, summary.stage2_alone);
    out << "  runs: " << summary.runs << '\n';
    return out.str();
}

} // namespace staged
