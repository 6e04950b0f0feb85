#ifndef ZIBC_ZIBC_HPP
#define ZIBC_ZIBC_HPP

#include <Eigen/Dense>
#include <array>
#include <string>

namespace zibc {

/// Aggregate data one trial must supply for the correction: per-arm sizes,
/// outcome means, zero proportions, and the reported Poisson effect and SE.
struct StudySummary {
    std::string study_id;
    long n_c = 0;
    long n_t = 0;
    double ybar_c = 0.0;
    double ybar_t = 0.0;
    double p0_c = 0.0;
    double p0_t = 0.0;
    double beta1_cv = 0.0;
    double se1_cv = 0.0;

    void validate() const; // throws ContractError naming the offending field
};

/// Solution of the arm-level moment system
///   (1 - pi) mu = ybar,   pi + (1 - pi) e^{-mu} = p0.
struct ZeroRateSolution {
    double pi_bar = 0.0;
    double mu_bar = 0.0;
    std::array<double, 2> residual{0.0, 0.0};
    bool clamped = false; // p0 <= e^{-ybar}: no excess zeros, pi forced to 0
};

struct CorrectionResult {
    double delta1_hat = 0.0;
    double beta1_zibc = 0.0;
    double se1 = 0.0;   // carried over from the reported conventional SE
    double wald_p = 1.0;
    ZeroRateSolution control;
    ZeroRateSolution treated;
};

/// Solve the arm-level zero-rate system for (pi, mu) given the observed mean
/// and zero proportion. Substituting mu = ybar/(1-pi) reduces it to a
/// bracketed scalar root in pi on [0, 1). Throws DomainError for degenerate
/// arms (ybar <= 0 or p0 >= 1).
ZeroRateSolution solve_zero_rate(double ybar, double p0);

/// Correction term -log(1 - pi_t) + log(1 - pi_c).
double delta1(double pi_t, double pi_c);

/// Bias-corrected intercept beta0_cv - log(1 - pi_bar).
double correct_intercept(double beta0_cv, double pi_bar);

/// Full aggregate-data correction for one study: per-arm zero-rate solve,
/// correction term, corrected effect; SE carried over unchanged.
CorrectionResult correct_study(const StudySummary& summary);

/// Diagnostic (needs participant-level data): the estimating-equation gap
/// (1/n) sum { (1 - pi_i) exp(x_i' delta) - 1 } exp(x_i' beta_star) x_i.
Eigen::VectorXd bias_equation_residual(const Eigen::VectorXd& delta,
                                       const Eigen::VectorXd& beta_star,
                                       const Eigen::VectorXd& pi,
                                       const Eigen::MatrixXd& X);

/// Diagnostic gradient of the averaged surrogate objective:
/// [ (1 - pi_bar) exp(xbar' (beta0 - beta)) - 1 ] * sum exp(x_i' beta) x_i.
Eigen::VectorXd q_gradient(const Eigen::VectorXd& beta,
                           const Eigen::VectorXd& beta0,
                           double pi_bar,
                           const Eigen::VectorXd& xbar,
                           const Eigen::MatrixXd& X);

/// Two-sided normal p-value for effect/se.
double wald_p_value(double effect, double se);

} // namespace zibc

#endif
