#pragma once

#include "stagedrisk/cascade.hpp"
#include "stagedrisk/config.hpp"
#include "stagedrisk/metrics.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace staged {

inline constexpr const char* kToolVersion = "1.0.0";

// Self-describing experiment record: config echo, one row per run, and a
// summary recomputable from the rows. `created_at` is the only
// non-deterministic field.
nlohmann::json single_protocol_report(const RunConfig& config,
                                      const std::vector<std::string>& features,
                                      const MetricSummary& summary,
                                      const std::vector<MetricSet>& per_run);

nlohmann::json two_stage_protocol_report(const RunConfig& config, const std::string& protocol,
                                         const std::vector<std::string>& clinical_features,
                                         const std::vector<std::string>& stage2_features,
                                         const TwoStageSummary& summary);

void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

// Fixed-width tables with every number at 3 decimal places.
std::string format_single_table(const MetricSummary& summary);
std::string format_two_stage_table(const TwoStageSummary& summary);

} // namespace staged
