#include "stagedrisk/glm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace staged {

namespace {

constexpr double kProbFloor = 1e-12;

// log(1 + exp(eta)) without overflow
double softplus(double eta) {
    if (eta > 0) return eta + std::log1p(std::exp(-eta));
    return std::log1p(std::exp(eta));
}

double penalized_loglik(const Eigen::VectorXd& beta, const Eigen::MatrixXd& X,
                        const Eigen::VectorXd& y, double ridge) {
    const auto n = X.rows();
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double eta = beta(0) + X.row(i).dot(beta.tail(beta.size() - 1));
        ll += y(i) * eta - softplus(eta);
    }
    double pen = 0.0;
    for (Eigen::Index j = 1; j < beta.size(); ++j) pen += beta(j) * beta(j);
    return ll - ridge * pen;
}

} // namespace

double sigmoid(double eta) {
    double p = eta >= 0 ? 1.0 / (1.0 + std::exp(-eta))
                        : std::exp(eta) / (1.0 + std::exp(eta));
    if (p < kProbFloor) p = kProbFloor;
    if (p > 1.0 - kProbFloor) p = 1.0 - kProbFloor;
    return p;
}

double LogisticModel::predict_proba(std::span<const double> x) const {
    if (x.size() != coefficients.size())
        throw std::invalid_argument("predict: expected " + std::to_string(coefficients.size()) +
                                    " features, got " + std::to_string(x.size()));
    double eta = intercept;
    for (std::size_t j = 0; j < coefficients.size(); ++j) eta += coefficients[j] * x[j];
    return sigmoid(eta);
}

double LogisticModel::predict_proba(const Cohort& cohort, std::size_t row) const {
    const Sample& s = cohort.sample(row);
    double eta = intercept;
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
        auto idx = cohort.schema().index_of(feature_names[j]);
        if (!idx)
            throw std::invalid_argument("predict: feature '" + feature_names[j] +
                                        "' not in cohort schema");
        double v = s.features[*idx];
        if (std::isnan(v))
            throw std::invalid_argument("predict: missing value for feature '" +
                                        feature_names[j] + "' in sample '" + s.id + "'");
        eta += coefficients[j] * v;
    }
    return sigmoid(eta);
}

std::pair<double, Eigen::VectorXd> loglik_and_grad(const Eigen::VectorXd& beta,
                                                   const Eigen::MatrixXd& X,
                                                   const Eigen::VectorXd& y, double ridge) {
    const auto n = X.rows();
    const auto p = X.cols();
    if (beta.size() != p + 1) throw std::invalid_argument("loglik_and_grad: beta size mismatch");

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p + 1);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double eta = beta(0) + X.row(i).dot(beta.tail(p));
        double mu = 1.0 / (1.0 + std::exp(-eta));
        ll += y(i) * eta - softplus(eta);
        double r = y(i) - mu;
        grad(0) += r;
        grad.tail(p) += r * X.row(i).transpose();
    }
    for (Eigen::Index j = 1; j <= p; ++j) {
        ll -= ridge * beta(j) * beta(j);
        grad(j) -= 2.0 * ridge * beta(j);
    }
    return {ll, grad};
}

LogisticModel fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           std::vector<std::string> feature_names, const FitOptions& options,
                           FitDiagnostics* diagnostics) {
    const auto n = X.rows();
    const auto p = X.cols();
    if (n == 0) throw std::invalid_argument("fit_logistic: no samples");
    if (p < 1) throw std::invalid_argument("fit_logistic: need at least one feature");
    if (static_cast<std::size_t>(p) != feature_names.size())
        throw std::invalid_argument("fit_logistic: feature name count mismatch");
    if (y.size() != n) throw std::invalid_argument("fit_logistic: label count mismatch");
    if (!X.allFinite() || !y.allFinite())
        throw std::invalid_argument("fit_logistic: non-finite input");

    bool has_pos = false, has_neg = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y(i) == 1.0)
            has_pos = true;
        else if (y(i) == 0.0)
            has_neg = true;
        else
            throw std::invalid_argument("fit_logistic: labels must be 0/1");
    }
    if (!has_pos || !has_neg) throw std::invalid_argument("fit_logistic: single-class labels");

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
    double ll = penalized_loglik(beta, X, y, options.ridge);
    if (diagnostics) diagnostics->loglik_per_iteration.clear();

    LogisticModel model;
    model.feature_names = std::move(feature_names);
    model.converged = false;

    Eigen::VectorXd eta(n), mu(n), w(n);
    int iter = 0;
    for (; iter < options.max_iter; ++iter) {
        eta = Eigen::VectorXd::Constant(n, beta(0)) + X * beta.tail(p);
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(p + 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            mu(i) = 1.0 / (1.0 + std::exp(-eta(i)));
            w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-10);
            double r = y(i) - mu(i);
            grad(0) += r;
        }
        grad.tail(p) = X.transpose() * (y - mu);
        for (Eigen::Index j = 1; j <= p; ++j) grad(j) -= 2.0 * options.ridge * beta(j);

        // Hessian of the penalized log-likelihood, negated: [1 X]' W [1 X] + 2*ridge
        Eigen::MatrixXd H(p + 1, p + 1);
        H(0, 0) = w.sum();
        Eigen::VectorXd xw = X.transpose() * w;
        H.block(1, 0, p, 1) = xw;
        H.block(0, 1, 1, p) = xw.transpose();
        H.block(1, 1, p, p) = X.transpose() * w.asDiagonal() * X;
        for (Eigen::Index j = 1; j <= p; ++j) H(j, j) += 2.0 * options.ridge;

        Eigen::VectorXd step = H.ldlt().solve(grad);
        if (!step.allFinite()) break;

        // Halve the step until the penalized log-likelihood does not decrease.
        double scale = 1.0;
        Eigen::VectorXd candidate;
        double cand_ll = -std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            candidate = beta + scale * step;
            cand_ll = penalized_loglik(candidate, X, y, options.ridge);
            if (cand_ll >= ll) {
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break; // flat to machine precision; keep current iterate

        double max_delta = (scale * step).cwiseAbs().maxCoeff();
        bool capped = candidate.cwiseAbs().maxCoeff() > options.beta_cap;
        if (capped) {
            // Quasi-separation: keep the last stable iterate, flag the model.
            model.converged = false;
            ++iter;
            break;
        }
        beta = candidate;
        ll = cand_ll;
        if (diagnostics) diagnostics->loglik_per_iteration.push_back(ll);
        if (max_delta <= options.tol) {
            model.converged = true;
            ++iter;
            break;
        }
    }

    model.intercept = beta(0);
    model.coefficients.assign(beta.data() + 1, beta.data() + p + 1);
    model.iterations_used = iter;
    model.final_log_likelihood = ll;
    return model;
}

LogisticModel fit_logistic(const Cohort& cohort, const std::vector<std::string>& features,
                           const FitOptions& options) {
    return fit_logistic(feature_matrix(cohort, features), label_vector(cohort), features,
                        options);
}

Eigen::MatrixXd feature_matrix(const Cohort& cohort, const std::vector<std::string>& features) {
    std::vector<std::size_t> rows(cohort.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return feature_matrix(cohort, features, rows);
}

Eigen::MatrixXd feature_matrix(const Cohort& cohort, const std::vector<std::string>& features,
                               const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> cols;
    cols.reserve(features.size());
    for (const auto& f : features) {
        auto idx = cohort.schema().index_of(f);
        if (!idx) throw std::invalid_argument("feature_matrix: unknown feature '" + f + "'");
        cols.push_back(*idx);
    }
    Eigen::MatrixXd X(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Sample& s = cohort.sample(rows[i]);
        for (std::size_t j = 0; j < cols.size(); ++j) {
            double v = s.features[cols[j]];
            if (std::isnan(v))
                throw std::invalid_argument("feature_matrix: missing value for feature '" +
                                            features[j] + "' in sample '" + s.id + "'");
            X(i, j) = v;
        }
    }
    return X;
}

Eigen::VectorXd label_vector(const Cohort& cohort) {
    std::vector<std::size_t> rows(cohort.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return label_vector(cohort, rows);
}

Eigen::VectorXd label_vector(const Cohort& cohort, const std::vector<std::size_t>& rows) {
    Eigen::VectorXd y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) y(i) = cohort.sample(rows[i]).outcome;
    return y;
}

} // namespace staged
