#pragma once

#include "stagedrisk/cohort.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace staged {

// Fitted binary logistic regression model. Coefficients are aligned with
// feature_names; predictions are clamped to the open interval (0, 1).
struct LogisticModel {
    double intercept = 0.0;
    std::vector<double> coefficients;
    std::vector<std::string> feature_names;
    bool converged = false;
    int iterations_used = 0;
    double final_log_likelihood = 0.0; // penalized, at the returned iterate

    double predict_proba(std::span<const double> x) const;

    // Name-aligned prediction against an arbitrary cohort row.
    double predict_proba(const Cohort& cohort, std::size_t row) const;
};

struct FitOptions {
    double ridge = 1e-6;  // L2 penalty on non-intercept coefficients
    double tol = 1e-8;    // convergence: max |delta beta| <= tol
    int max_iter = 100;
    double beta_cap = 1e3; // separation guard: stop once any |beta| exceeds this
};

struct FitDiagnostics {
    std::vector<double> loglik_per_iteration; // penalized, after each accepted step
};

// Damped-Newton (IRLS) maximization of the ridge-penalized log-likelihood.
// X has one row per sample and no intercept column. Throws on single-class
// y or non-finite input. Under separation the last stable iterate is
// returned with converged = false.
LogisticModel fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           std::vector<std::string> feature_names, const FitOptions& options = {},
                           FitDiagnostics* diagnostics = nullptr);

LogisticModel fit_logistic(const Cohort& cohort, const std::vector<std::string>& features,
                           const FitOptions& options = {});

// Penalized log-likelihood and its analytic gradient at beta = [b0, b1..bp].
std::pair<double, Eigen::VectorXd> loglik_and_grad(const Eigen::VectorXd& beta,
                                                   const Eigen::MatrixXd& X,
                                                   const Eigen::VectorXd& y, double ridge);

// Design-matrix helpers shared by the fitters and the ensembles. Rows with
// missing values in the requested features throw.
Eigen::MatrixXd feature_matrix(const Cohort& cohort, const std::vector<std::string>& features);
Eigen::MatrixXd feature_matrix(const Cohort& cohort, const std::vector<std::string>& features,
                               const std::vector<std::size_t>& rows);
Eigen::VectorXd label_vector(const Cohort& cohort);
Eigen::VectorXd label_vector(const Cohort& cohort, const std::vector<std::size_t>& rows);

double sigmoid(double eta);

} // namespace staged
