#ifndef ZIBC_GLM_POISSON_HPP
#define ZIBC_GLM_POISSON_HPP

#include <Eigen/Dense>
#include <vector>

#include "zibc/design.hpp"

namespace zibc {

struct GlmOptions {
    int max_iter = 100;
    double ll_rel_tol = 1e-10;   // relative log-likelihood change
    double grad_tol = 1e-8;      // max-norm of the mean score
    double eta_clamp = 30.0;     // linear-predictor bound during iteration
    double rank_threshold = 1e-10;
};

/// Converged Poisson regression fit. covariance is the inverse Fisher
/// information (observed = expected under the canonical log link).
struct FitResult {
    Coefficients beta;
    Eigen::MatrixXd covariance;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
    bool eta_clamped = false;         // final iterate touched the clamp
    std::vector<double> ll_path;      // per-iteration log-likelihood
};

/// IRLS (Fisher scoring) with step-halving for the log-linear Poisson model.
/// Throws ContractError / DomainError on bad inputs, NumericalError when
/// max_iter is exhausted (message carries the last iterate).
FitResult fit_poisson(const DesignMatrix& X, const Eigen::VectorXd& y,
                      const GlmOptions& opts = {});

/// sqrt of the covariance diagonal; requires a converged fit.
Eigen::VectorXd standard_errors(const FitResult& fit);

namespace detail {

// Weighted variant shared with the ZIP EM M-step: maximizes
// sum_i w_i (y_i log mu_i - mu_i). Unit weights recover fit_poisson.
FitResult fit_poisson_weighted(const DesignMatrix& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& weights,
                               const GlmOptions& opts,
                               const Eigen::VectorXd* start = nullptr,
                               bool check_rank = true);

} // namespace detail

} // namespace zibc

#endif
