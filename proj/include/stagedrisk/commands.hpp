#pragma once

#include "stagedrisk/config.hpp"

#include <iosfwd>
#include <string>

namespace staged {

// Subcommand bodies shared by the CLI binary and the tests. Each returns a
// process exit code and reports failures on `err`; exit 0 means every
// requested output file was written.

// Applies the missing-value, variance, correlation, and scaling steps to
// the input CSV; writes the transformed cohort and the fitted pipeline.
int cmd_prep(const RunConfig& config, std::ostream& out, std::ostream& err);

// Runs one protocol ("single", "two-stage", "external") end to end and
// writes its report; two-stage and external also persist a deployment
// model trained on the full input cohort.
int cmd_run(const RunConfig& config, const std::string& protocol, std::ostream& out,
            std::ostream& err);

// Scores an input CSV with a persisted model. Rows routed to stage 2
// without their imaging values come back as "needs-imaging" rather than a
// prediction.
int cmd_score(const std::string& model_path, const std::string& input_csv,
              const std::string& output_csv, const std::string& id_col, std::ostream& out,
              std::ostream& err);

struct SynthArgs {
    std::size_t n = 1000;
    double prevalence = 0.10;
    double borderline_lo = -1.0;
    double borderline_hi = 1.0;
    std::uint64_t seed = 1;
    std::string out_csv = "synthetic.csv";
};

// Writes a synthetic cohort whose imaging features only matter inside the
// borderline band of the clinical score.
int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);

// The synthetic generator configuration behind cmd_synth, exposed so runs
// and tests can build the same family programmatically.
SyntheticSpec default_synthetic_spec(std::size_t n, double prevalence, double borderline_lo,
                                     double borderline_hi, std::uint64_t seed);

// Schema and column mapping matching default_synthetic_spec outputs.
FeatureSchema default_synthetic_schema();
LoadOptions default_synthetic_columns();

} // namespace staged
