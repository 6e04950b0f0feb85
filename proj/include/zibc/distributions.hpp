#ifndef ZIBC_DISTRIBUTIONS_HPP
#define ZIBC_DISTRIBUTIONS_HPP

#include <Eigen/Dense>

#include "zibc/design.hpp"

namespace zibc {

/// Parameters of one zero-inflated Poisson population: a point mass at zero
/// with probability pi and a Poisson(mu) component otherwise.
struct ZipParams {
    double pi;
    double mu;

    // pi may be 1 (degenerate all-zero population); estimation code keeps it
    // strictly below 1.
    ZipParams(double pi_, double mu_);
    double mean() const { return (1.0 - pi) * mu; }
};

// log f(y | mu) for Poisson; log(y!) via lgamma so large counts are safe.
double poisson_log_pmf(long y, double mu);

// log pmf of the zero-inflated mixture. pi == 1 with y > 0 yields -inf.
double zip_log_pmf(long y, const ZipParams& params);

// Poisson log-likelihood sum_i log f(y_i | exp(x_i' beta)).
double poisson_log_likelihood(const Eigen::VectorXd& beta,
                              const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y);

// ZIP log-likelihood with observation-level zero rates pi_i and
// mu_i = exp(x_i' beta).
double zip_log_likelihood(const Eigen::VectorXd& beta,
                          const Eigen::VectorXd& pi,
                          const Eigen::MatrixXd& X,
                          const Eigen::VectorXd& y);

// Mean Poisson estimating function (1/n) sum_i (y_i - exp(x_i' beta)) x_i.
// Throws NumericalError if the result is not finite (exp overflow).
Eigen::VectorXd score_cv(const Eigen::VectorXd& beta,
                         const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& y);

// ZIP estimating function: zero-observation term plus the Poisson term,
// both averaged over n.
Eigen::VectorXd score_zip(const Eigen::VectorXd& beta,
                          const Eigen::VectorXd& pi,
                          const Eigen::MatrixXd& X,
                          const Eigen::VectorXd& y);

} // namespace zibc

#endif
