#include "zibc/glm_poisson.hpp"

#include <cmath>
#include <sstream>

#include "zibc/accum.hpp"
#include "zibc/errors.hpp"

namespace zibc {

namespace {

void check_outcome(const Eigen::VectorXd& y) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i]) || y[i] < 0.0) {
            throw ContractError("count outcome must be finite and nonnegative (row " +
                                std::to_string(i) + ")");
        }
    }
}

// Column-pivoted QR rank check; names the first dependent column.
void check_full_rank(const DesignMatrix& X, double threshold) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X.values);
    qr.setThreshold(threshold);
    const Eigen::Index rank = qr.rank();
    if (rank < X.p()) {
        const auto& perm = qr.colsPermutation().indices();
        const Eigen::Index offender = perm[rank];
        throw ContractError("design matrix is rank deficient: column '" +
                            X.labels[static_cast<std::size_t>(offender)] +
                            "' is linearly dependent");
    }
}

double weighted_log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& w) {
    KahanSum ll;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double mu = std::exp(eta[i]);
        ll.add(w[i] * (y[i] * eta[i] - mu - std::lgamma(y[i] + 1.0)));
    }
    return ll.total();
}

} // namespace

namespace detail {

FitResult fit_poisson_weighted(const DesignMatrix& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& weights,
                               const GlmOptions& opts,
                               const Eigen::VectorXd* start,
                               bool check_rank) {
    X.validate();
    check_outcome(y);
    const Eigen::Index n = X.n();
    const Eigen::Index p = X.p();
    if (y.size() != n) {
        throw ContractError("outcome length does not match design rows");
    }
    if (weights.size() != n) {
        throw ContractError("weight length does not match design rows");
    }
    if (n < p) {
        throw ContractError("need at least as many observations as coefficients");
    }
    if (check_rank) {
        check_full_rank(X, opts.rank_threshold);
    }

    const double wsum = weights.sum();
    const double wy = weights.dot(y);
    if (wy <= 0.0) {
        throw DomainError("all-outcome weighted sum is zero: Poisson MLE degenerate at -inf");
    }

    Eigen::VectorXd beta(p);
    if (start != nullptr) {
        beta = *start;
    } else {
        beta.setZero();
        beta[0] = std::log(wy / wsum + 0.5 / static_cast<double>(n));
    }

    const auto clamp_eta = [&](Eigen::VectorXd& eta) {
        bool clamped = false;
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            if (eta[i] > opts.eta_clamp) {
                eta[i] = opts.eta_clamp;
                clamped = true;
            } else if (eta[i] < -opts.eta_clamp) {
                eta[i] = -opts.eta_clamp;
                clamped = true;
            }
        }
        return clamped;
    };

    FitResult result;
    result.beta.labels = X.labels;

    Eigen::VectorXd eta = X.values * beta;
    bool eta_clamped = clamp_eta(eta);
    double ll = weighted_log_likelihood(eta, y, weights);
    result.ll_path.push_back(ll);

    const double n_d = static_cast<double>(n);
    Eigen::VectorXd mu = eta.array().exp();
    Eigen::VectorXd grad = X.values.transpose() * (weights.cwiseProduct(y - mu)) / n_d;

    int iter = 0;
    bool converged = false;
    for (; iter < opts.max_iter; ++iter) {
        const Eigen::VectorXd irls_w = weights.cwiseProduct(mu);
        const Eigen::MatrixXd info = X.values.transpose() * irls_w.asDiagonal() * X.values;
        const Eigen::VectorXd rhs = X.values.transpose() * (weights.cwiseProduct(y - mu));
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success) {
            throw NumericalError("IRLS information matrix factorization failed");
        }
        const Eigen::VectorXd step = ldlt.solve(rhs);

        // step-halving keeps the likelihood path nondecreasing
        double t = 1.0;
        Eigen::VectorXd beta_new;
        Eigen::VectorXd eta_new;
        double ll_new = ll;
        bool clamped_new = false;
        bool accepted = false;
        for (int h = 0; h < 40; ++h) {
            beta_new = beta + t * step;
            eta_new = X.values * beta_new;
            clamped_new = clamp_eta(eta_new);
            ll_new = weighted_log_likelihood(eta_new, y, weights);
            if (ll_new >= ll - 1e-12) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            break; // cannot improve: treat as stalled, convergence checked below
        }

        const double ll_change = std::abs(ll_new - ll) / (std::abs(ll_new) + 1.0);
        beta = beta_new;
        eta = eta_new;
        eta_clamped = clamped_new;
        ll = ll_new;
        result.ll_path.push_back(ll);
        mu = eta.array().exp();
        grad = X.values.transpose() * (weights.cwiseProduct(y - mu)) / n_d;

        if (ll_change < opts.ll_rel_tol) {
            if (!eta_clamped && grad.lpNorm<Eigen::Infinity>() < opts.grad_tol) {
                converged = true;
                ++iter;
                break;
            }
            if (eta_clamped) {
                // saturated at the linear-predictor clamp: flagged, not thrown
                ++iter;
                break;
            }
        }
    }

    result.beta.values = beta;
    result.log_likelihood = ll;
    result.iterations = iter;
    result.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    result.eta_clamped = eta_clamped;
    result.converged = converged && !eta_clamped;

    if (!converged && iter >= opts.max_iter) {
        std::ostringstream msg;
        msg << "Poisson IRLS did not converge in " << opts.max_iter
            << " iterations; last iterate beta = [";
        for (Eigen::Index j = 0; j < p; ++j) {
            msg << (j ? ", " : "") << beta[j];
        }
        msg << "], gradient max-norm = " << result.gradient_norm;
        throw NumericalError(msg.str());
    }

    const Eigen::VectorXd irls_w = weights.cwiseProduct(mu);
    const Eigen::MatrixXd info = X.values.transpose() * irls_w.asDiagonal() * X.values;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) {
        throw NumericalError("Fisher information not invertible at the optimum");
    }
    result.covariance = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    result.covariance = 0.5 * (result.covariance + result.covariance.transpose().eval());
    return result;
}

} // namespace detail

FitResult fit_poisson(const DesignMatrix& X, const Eigen::VectorXd& y,
                      const GlmOptions& opts) {
    if (y.size() > 0 && y.maxCoeff() <= 0.0) {
        throw DomainError("all outcomes are zero: Poisson MLE degenerate at -inf");
    }
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(y.size());
    return detail::fit_poisson_weighted(X, y, w, opts, nullptr, true);
}

Eigen::VectorXd standard_errors(const FitResult& fit) {
    if (!fit.converged) {
        throw ContractError("standard errors require a converged fit");
    }
    Eigen::VectorXd se(fit.covariance.rows());
    for (Eigen::Index j = 0; j < se.size(); ++j) {
        const double v = fit.covariance(j, j);
        if (v < 0.0 || !std::isfinite(v)) {
            throw NumericalError("covariance diagonal entry " + std::to_string(j) +
                                 " is negative or non-finite");
        }
        se[j] = std::sqrt(v);
    }
    return se;
}

} // namespace zibc
