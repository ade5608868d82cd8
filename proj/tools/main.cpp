#include "stagedrisk/commands.hpp"
#include "stagedrisk/config.hpp"
#include "stagedrisk/report.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <string>

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> runs;
    std::optional<std::string> out_dir;
    std::optional<std::string> input_csv;
    std::optional<std::size_t> threads;
};

staged::RunConfig resolve_config(const std::string& config_path, const Overrides& o) {
    staged::RunConfig config;
    if (!config_path.empty()) config = staged::load_config(config_path);
    if (o.seed) config.seed = *o.seed;
    if (o.runs) config.runs = *o.runs;
    if (o.out_dir) config.out_dir = *o.out_dir;
    if (o.input_csv) config.input_csv = *o.input_csv;
    if (o.threads) config.threads = *o.threads;
    return config;
}

void add_overrides(CLI::App* cmd, std::string& config_path, Overrides& o) {
    cmd->add_option("--config", config_path, "JSON configuration file");
    cmd->add_option("--seed", o.seed, "override the configured seed");
    cmd->add_option("--runs", o.runs, "override the configured run count");
    cmd->add_option("--out-dir", o.out_dir, "override the output directory");
    cmd->add_option("--input", o.input_csv, "override the input CSV path");
    cmd->add_option("--threads", o.threads, "override the worker thread count");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage risk classifier: uncertainty-gated routing from a "
                 "clinical ensemble to a clinical+imaging ensemble"};
    app.require_subcommand(1);
    app.set_version_flag("--version", staged::kToolVersion);

    std::string config_path;
    Overrides overrides;

    auto* synth = app.add_subcommand("synth", "generate a synthetic cohort CSV");
    staged::SynthArgs synth_args;
    synth->add_option("--n", synth_args.n, "cohort size");
    synth->add_option("--prevalence", synth_args.prevalence, "target positive fraction");
    synth->add_option("--band-lo", synth_args.borderline_lo,
                      "lower edge of the borderline clinical-score band");
    synth->add_option("--band-hi", synth_args.borderline_hi,
                      "upper edge of the borderline clinical-score band");
    synth->add_option("--seed", synth_args.seed, "generator seed");
    synth->add_option("--out", synth_args.out_csv, "output CSV path");

    auto* prep = app.add_subcommand("prep", "filter and transform a raw cohort CSV");
    add_overrides(prep, config_path, overrides);

    auto* run = app.add_subcommand("run", "execute an evaluation protocol and write its report");
    std::string protocol = "two-stage";
    add_overrides(run, config_path, overrides);
    run->add_option("--protocol", protocol, "single, two-stage, or external")
        ->check(CLI::IsMember({"single", "two-stage", "external"}));

    auto* score = app.add_subcommand("score", "score a CSV with a persisted model");
    std::string model_path, score_input, score_output = "decisions.csv", id_col = "id";
    score->add_option("--model", model_path, "model JSON file")->required();
    score->add_option("--input", score_input, "input CSV")->required();
    score->add_option("--out", score_output, "output decisions CSV");
    score->add_option("--id-col", id_col, "id column name in the input CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return staged::cmd_synth(synth_args, std::cout, std::cerr);
        if (prep->parsed())
            return staged::cmd_prep(resolve_config(config_path, overrides), std::cout,
                                    std::cerr);
        if (run->parsed())
            return staged::cmd_run(resolve_config(config_path, overrides), protocol, std::cout,
                                   std::cerr);
        if (score->parsed())
            return staged::cmd_score(model_path, score_input, score_output, id_col, std::cout,
                                     std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
