#include "stagedrisk/featsel.hpp"

#include "stagedrisk/glm.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace staged {

namespace {

constexpr std::uint64_t kRfeTag = 0x8fe;

// One full elimination pass over a fixed resample. Returns false if any
// inner fit is degenerate (zero-variance column, separation, or failure to
// converge), in which case the caller redraws the resample.
bool elimination_pass(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const std::vector<std::string>& names, std::vector<double>& ranks_out) {
    const std::size_t m = names.size();
    std::vector<std::size_t> remaining(m);
    std::iota(remaining.begin(), remaining.end(), 0);
    ranks_out.assign(m, 0.0);

    while (remaining.size() > 1) {
        const auto n = X.rows();
        Eigen::MatrixXd sub(n, static_cast<Eigen::Index>(remaining.size()));
        for (std::size_t k = 0; k < remaining.size(); ++k) {
            Eigen::VectorXd col = X.col(static_cast<Eigen::Index>(remaining[k]));
            double mean = col.mean();
            double ss = (col.array() - mean).square().sum();
            double sd = std::sqrt(ss / static_cast<double>(n - 1));
            if (!(sd > 0.0)) return false;
            sub.col(static_cast<Eigen::Index>(k)) = (col.array() - mean) / sd;
        }

        std::vector<std::string> sub_names;
        sub_names.reserve(remaining.size());
        for (std::size_t idx : remaining) sub_names.push_back(names[idx]);

        LogisticModel model;
        try {
            model = fit_logistic(sub, y, sub_names);
        } catch (const std::exception&) {
            return false;
        }
        if (!model.converged) return false;

        std::size_t weakest = 0;
        for (std::size_t k = 1; k < remaining.size(); ++k) {
            double a = std::abs(model.coefficients[k]);
            double b = std::abs(model.coefficients[weakest]);
            if (a < b || (a == b && names[remaining[k]] > names[remaining[weakest]])) weakest = k;
        }

        ranks_out[remaining[weakest]] = static_cast<double>(remaining.size());
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(weakest));
    }
    ranks_out[remaining.front()] = 1.0;
    return true;
}

} // namespace

std::string RankTable::to_csv() const {
    std::string out = "feature,avg_rank,n_iterations\n";
    char buf[64];
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g,%zu", average_rank[j], iterations);
        out += feature_names[j];
        out += ',';
        out += buf;
        out += '\n';
    }
    return out;
}

RankTable rfe_rank(const Cohort& cohort, const std::vector<std::string>& features,
                   const RfeOptions& options, const RngStream& rng) {
    if (options.iterations == 0) throw std::invalid_argument("rfe_rank: iterations must be >= 1");
    if (features.size() < 2) throw std::invalid_argument("rfe_rank: needs at least 2 features");
    for (const auto& f : features)
        if (!cohort.schema().contains(f))
            throw std::invalid_argument("rfe_rank: unknown feature '" + f + "'");

    const std::vector<int> labels = cohort.labels();
    const Eigen::MatrixXd X_full = feature_matrix(cohort, features);
    const Eigen::VectorXd y_full = label_vector(cohort);

    RankTable table;
    table.feature_names = features;
    table.iterations = options.iterations;
    table.iteration_ranks.resize(options.iterations);

    for (std::size_t iter = 0; iter < options.iterations; ++iter) {
        bool done = false;
        for (std::size_t redraw = 0; redraw <= options.max_redraws && !done; ++redraw) {
            RngStream stream = rng.child(kRfeTag, iter, redraw);
            std::vector<std::size_t> rows = bootstrap_indices(labels, stream);

            Eigen::MatrixXd X(rows.size(), X_full.cols());
            Eigen::VectorXd y(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                X.row(static_cast<Eigen::Index>(i)) =
                    X_full.row(static_cast<Eigen::Index>(rows[i]));
                y(static_cast<Eigen::Index>(i)) = y_full(static_cast<Eigen::Index>(rows[i]));
            }

            done = elimination_pass(X, y, features, table.iteration_ranks[iter]);
        }
        if (!done)
            throw std::runtime_error("rfe_rank: iteration " + std::to_string(iter) +
                                     " stayed degenerate after " +
                                     std::to_string(options.max_redraws) + " redraws");
    }

    table.average_rank.assign(features.size(), 0.0);
    for (const auto& ranks : table.iteration_ranks)
        for (std::size_t j = 0; j < features.size(); ++j) table.average_rank[j] += ranks[j];
    for (auto& r : table.average_rank) r /= static_cast<double>(options.iterations);
    return table;
}

std::vector<std::string> select_top_k(const RankTable& table, std::size_t k) {
    if (k == 0) throw std::invalid_argument("select_top_k: k must be >= 1");
    if (k > table.feature_names.size())
        throw std::invalid_argument("select_top_k: k = " + std::to_string(k) + " exceeds the " +
                                    std::to_string(table.feature_names.size()) +
                                    " ranked features");
    std::vector<std::size_t> order(table.feature_names.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (table.average_rank[a] != table.average_rank[b])
            return table.average_rank[a] < table.average_rank[b];
        return table.feature_names[a] < table.feature_names[b];
    });
    std::vector<std::string> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(table.feature_names[order[i]]);
    return out;
}

} // namespace staged
