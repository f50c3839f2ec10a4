#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hrm/families.hpp"

namespace hrm {

struct GlmOptions {
    double tolerance = 1e-8;  // relative gradient norm at the optimum
    int max_iterations = 100;
    // Variance function theta * mu^p for the gamma family. p = 2 is the gamma
    // GLM; other values give a quasi-likelihood fit.
    double variance_power = 2.0;
};

struct GlmFit {
    Family family = Family::bernoulli;
    Link link = Link::logit;
    std::vector<std::string> column_names;
    Eigen::VectorXd coefficients;  // 0 for aliased columns
    std::vector<bool> aliased;
    double dispersion = 1.0;  // theta for gamma, 1 otherwise
    double variance_power = 2.0;
    int iterations = 0;
    double gradient_norm = 0.0;
    double deviance = 0.0;
    int rank = 0;

    std::vector<std::string> aliased_columns() const;
    double linear_predictor(const Eigen::Ref<const Eigen::VectorXd>& x) const { return x.dot(coefficients); }
};

/// Weighted GLM fit by iteratively reweighted least squares with step halving.
/// Columns that are linear combinations of earlier columns are reported as
/// aliased and dropped.
GlmFit fit_glm(Family family, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
               std::vector<std::string> column_names = {}, const GlmOptions& options = {});

GlmFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                    std::vector<std::string> column_names = {}, const GlmOptions& options = {});
GlmFit fit_gamma(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                 std::vector<std::string> column_names = {}, const GlmOptions& options = {});

/// Weighted log-likelihood sum_i w_i log f(y_i | x_i beta) with the fit's dispersion.
double glm_loglik(Family family, const Eigen::VectorXd& beta, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& w, double dispersion = 1.0, double variance_power = 2.0);

/// Gradient of glm_loglik with respect to beta (quasi-score when variance_power != 2).
Eigen::VectorXd glm_score(Family family, const Eigen::VectorXd& beta, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& w, double dispersion = 1.0,
                          double variance_power = 2.0);

}  // namespace hrm
