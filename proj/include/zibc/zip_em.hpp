#ifndef ZIBC_ZIP_EM_HPP
#define ZIBC_ZIP_EM_HPP

#include <Eigen/Dense>
#include <vector>

#include "zibc/design.hpp"

namespace zibc {

/// Design choice for the structural-zero (logistic) part of the model.
enum class ZeroModel {
    FullCovariates, // same columns as the count model
    InterceptOnly,
};

struct ZipEmOptions {
    int max_em_iter = 500;
    double ll_rel_tol = 1e-9;
    double param_tol = 1e-7;
    int max_mstep_iter = 50;
    double weight_clamp = 1e-12;  // E-step posterior weight bounds
    bool polish = true;           // Newton polish on the joint score after EM
    int max_polish_iter = 60;
    double polish_score_tol = 1e-11; // on the 1/n-scaled joint score
};

/// Maximum likelihood fit of the zero-inflated Poisson model.
/// count_beta holds the Poisson-portion coefficients; zero_gamma the logistic
/// coefficients of the structural-zero probability.
struct ZipFitResult {
    Coefficients count_beta;
    Coefficients zero_gamma;
    Eigen::MatrixXd covariance;   // joint (p+q) x (p+q), count block first
    bool covariance_available = false;
    double log_likelihood = 0.0;
    int em_iterations = 0;
    bool converged = false;
    double joint_score_norm = 0.0; // max-norm of the mean joint score
    ZeroModel zero_model = ZeroModel::FullCovariates;
    std::vector<double> ll_path;
};

/// EM with exact E-step posteriors and weighted Poisson / logistic M-steps,
/// followed by a Newton polish on the analytic joint score. Throws
/// DomainError when y has no zeros (ZIP unidentified; fit plain Poisson) or
/// no positives, NumericalError on non-convergence.
ZipFitResult fit_zip(const DesignMatrix& X, const Eigen::VectorXd& y,
                     ZeroModel zero_spec = ZeroModel::FullCovariates,
                     const ZipEmOptions& opts = {});

/// Inverse of the negative Hessian of the full ZIP log-likelihood at the fit,
/// Hessian from central finite differences of the analytic score (step 1e-5).
/// Throws NumericalError when the Hessian is not invertible.
Eigen::MatrixXd zip_covariance(const ZipFitResult& fit, const DesignMatrix& X,
                               const Eigen::VectorXd& y);

namespace detail {

// Zero-part design implied by the chosen zero-model form.
Eigen::MatrixXd zero_design(const DesignMatrix& X, ZeroModel spec);

// Unscaled gradient of the joint ZIP log-likelihood in (beta, gamma).
Eigen::VectorXd zip_joint_score(const Eigen::VectorXd& beta,
                                const Eigen::VectorXd& gamma,
                                const Eigen::MatrixXd& X,
                                const Eigen::MatrixXd& Z,
                                const Eigen::VectorXd& y);

double zip_joint_log_likelihood(const Eigen::VectorXd& beta,
                                const Eigen::VectorXd& gamma,
                                const Eigen::MatrixXd& X,
                                const Eigen::MatrixXd& Z,
                                const Eigen::VectorXd& y);

} // namespace detail

} // namespace zibc

#endif
