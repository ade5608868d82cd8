#pragma once

#include "stagedrisk/cohort.hpp"
#include "stagedrisk/rng.hpp"

#include <string>
#include <vector>

namespace staged {

// Feature importance from repeated recursive elimination. Rank 1 is the
// most important feature (last survivor of an elimination pass).
struct RankTable {
    std::vector<std::string> feature_names;
    std::vector<double> average_rank;                 // parallel to feature_names
    std::vector<std::vector<double>> iteration_ranks; // [iteration][feature]
    std::size_t iterations = 0;

    std::string to_csv() const; // header: feature,avg_rank,n_iterations
};

struct RfeOptions {
    std::size_t iterations = 100;
    std::size_t max_redraws = 10; // per iteration, on a degenerate resample
};

// Per iteration: bootstrap-resample the cohort, then repeatedly fit a
// logistic model on the remaining features (center-scaled within the
// resample) and eliminate the one with the smallest |coefficient|; the
// elimination order is the rank (last eliminated = 1). Ranks are averaged
// across iterations. Deterministic given the stream.
RankTable rfe_rank(const Cohort& cohort, const std::vector<std::string>& features,
                   const RfeOptions& options, const RngStream& rng);

// The k features with the smallest average rank, best first; ties broken
// lexicographically by name.
std::vector<std::string> select_top_k(const RankTable& table, std::size_t k);

} // namespace staged
