#include "zibc/distributions.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "zibc/accum.hpp"
#include "zibc/errors.hpp"

namespace zibc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_lengths(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& beta) {
    if (y.size() != X.rows()) {
        throw ContractError("outcome length " + std::to_string(y.size()) +
                            " does not match design rows " + std::to_string(X.rows()));
    }
    if (beta.size() != X.cols()) {
        throw ContractError("coefficient length " + std::to_string(beta.size()) +
                            " does not match design columns " + std::to_string(X.cols()));
    }
}

} // namespace

ZipParams::ZipParams(double pi_, double mu_) : pi(pi_), mu(mu_) {
    if (!std::isfinite(pi) || pi < 0.0 || pi > 1.0) {
        throw DomainError("zero-inflation probability must lie in [0,1], got " +
                          std::to_string(pi));
    }
    if (!std::isfinite(mu) || mu <= 0.0) {
        throw DomainError("Poisson mean must be positive and finite, got " +
                          std::to_string(mu));
    }
}

double poisson_log_pmf(long y, double mu) {
    if (!std::isfinite(mu) || mu <= 0.0) {
        throw DomainError("Poisson mean must be positive and finite, got " +
                          std::to_string(mu));
    }
    if (y < 0) {
        throw DomainError("count outcome must be nonnegative, got " + std::to_string(y));
    }
    const double yd = static_cast<double>(y);
    return -mu + yd * std::log(mu) - std::lgamma(yd + 1.0);
}

double zip_log_pmf(long y, const ZipParams& params) {
    if (y < 0) {
        throw DomainError("count outcome must be nonnegative, got " + std::to_string(y));
    }
    if (y == 0) {
        // pi + (1-pi) e^{-mu}; at pi == 1 this is exactly 1.
        return std::log(params.pi + (1.0 - params.pi) * std::exp(-params.mu));
    }
    if (params.pi >= 1.0) {
        return kNegInf; // positive count has probability zero
    }
    return std::log1p(-params.pi) + poisson_log_pmf(y, params.mu);
}

double poisson_log_likelihood(const Eigen::VectorXd& beta,
                              const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y) {
    if (y.size() != X.rows() || beta.size() != X.cols()) {
        throw ContractError("dimension mismatch in poisson_log_likelihood");
    }
    const Eigen::VectorXd eta = X * beta;
    KahanSum ll;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double mu = std::exp(eta[i]);
        ll.add(-mu + y[i] * eta[i] - std::lgamma(y[i] + 1.0));
    }
    return ll.total();
}

double zip_log_likelihood(const Eigen::VectorXd& beta,
                          const Eigen::VectorXd& pi,
                          const Eigen::MatrixXd& X,
                          const Eigen::VectorXd& y) {
    check_lengths(X, y, beta);
    if (pi.size() != y.size()) {
        throw ContractError("zero-rate vector length does not match outcome length");
    }
    const Eigen::VectorXd eta = X * beta;
    KahanSum ll;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double mu = std::exp(eta[i]);
        if (y[i] == 0.0) {
            ll.add(std::log(pi[i] + (1.0 - pi[i]) * std::exp(-mu)));
        } else if (pi[i] >= 1.0) {
            return kNegInf;
        } else {
            ll.add(std::log1p(-pi[i]) - mu + y[i] * eta[i] - std::lgamma(y[i] + 1.0));
        }
    }
    return ll.total();
}

Eigen::VectorXd score_cv(const Eigen::VectorXd& beta,
                         const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& y) {
    check_lengths(X, y, beta);
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const Eigen::VectorXd eta = X * beta;
    std::vector<KahanSum> acc(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double resid = y[i] - std::exp(eta[i]);
        for (Eigen::Index j = 0; j < p; ++j) {
            acc[j].add(resid * X(i, j));
        }
    }
    Eigen::VectorXd s(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        s[j] = acc[j].total() / static_cast<double>(n);
    }
    if (!s.allFinite()) {
        throw NumericalError("Poisson score is non-finite (exp overflow in linear predictor)");
    }
    return s;
}

Eigen::VectorXd score_zip(const Eigen::VectorXd& beta,
                          const Eigen::VectorXd& pi,
                          const Eigen::MatrixXd& X,
                          const Eigen::VectorXd& y) {
    check_lengths(X, y, beta);
    if (pi.size() != y.size()) {
        throw ContractError("zero-rate vector length does not match outcome length");
    }
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const Eigen::VectorXd eta = X * beta;
    std::vector<KahanSum> acc(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = std::exp(eta[i]);
        double term = y[i] - mu;
        if (y[i] == 0.0) {
            const double denom = pi[i] + (1.0 - pi[i]) * std::exp(-mu);
            term += pi[i] / denom * mu;
        }
        for (Eigen::Index j = 0; j < p; ++j) {
            acc[j].add(term * X(i, j));
        }
    }
    Eigen::VectorXd s(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        s[j] = acc[j].total() / static_cast<double>(n);
    }
    if (!s.allFinite()) {
        throw NumericalError("ZIP score is non-finite (exp overflow in linear predictor)");
    }
    return s;
}

} // namespace zibc
