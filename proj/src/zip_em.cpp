#include "zibc/zip_em.hpp"

#include <cmath>
#include <sstream>

#include "zibc/accum.hpp"
#include "zibc/distributions.hpp"
#include "zibc/errors.hpp"
#include "zibc/glm_poisson.hpp"

namespace zibc {

namespace {

double expit(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Eigen::VectorXd expit_vec(const Eigen::MatrixXd& Z, const Eigen::VectorXd& gamma) {
    Eigen::VectorXd eta = Z * gamma;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        eta[i] = expit(eta[i]);
    }
    return eta;
}

double logistic_objective(const Eigen::MatrixXd& Z, const Eigen::VectorXd& gamma,
                          const Eigen::VectorXd& w) {
    const Eigen::VectorXd eta = Z * gamma;
    KahanSum ll;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        // w log(pi) + (1-w) log(1-pi) written through log1p(exp(.)) for stability
        const double log_pi = -std::log1p(std::exp(-eta[i]));
        const double log_1mpi = -std::log1p(std::exp(eta[i]));
        ll.add(w[i] * log_pi + (1.0 - w[i]) * log_1mpi);
    }
    return ll.total();
}

// Newton with step-halving for the weighted Bernoulli likelihood with
// fractional responses w.
Eigen::VectorXd fit_logistic(const Eigen::MatrixXd& Z, const Eigen::VectorXd& w,
                             Eigen::VectorXd gamma, int max_iter) {
    const Eigen::Index q = Z.cols();
    double obj = logistic_objective(Z, gamma, w);
    for (int iter = 0; iter < max_iter; ++iter) {
        const Eigen::VectorXd pi = expit_vec(Z, gamma);
        const Eigen::VectorXd grad = Z.transpose() * (w - pi);
        const Eigen::VectorXd v = pi.array() * (1.0 - pi.array());
        const Eigen::MatrixXd hess = Z.transpose() * v.asDiagonal() * Z;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess +
                                          1e-12 * Eigen::MatrixXd::Identity(q, q));
        const Eigen::VectorXd step = ldlt.solve(grad);
        if (!step.allFinite()) {
            break;
        }
        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h < 30; ++h) {
            const Eigen::VectorXd cand = gamma + t * step;
            const double cand_obj = logistic_objective(Z, cand, w);
            if (cand_obj >= obj - 1e-12) {
                gamma = cand;
                accepted = cand_obj > obj;
                obj = cand_obj;
                break;
            }
            t *= 0.5;
        }
        if (!accepted || grad.lpNorm<Eigen::Infinity>() < 1e-10) {
            break;
        }
    }
    return gamma;
}

} // namespace

namespace detail {

Eigen::MatrixXd zero_design(const DesignMatrix& X, ZeroModel spec) {
    if (spec == ZeroModel::InterceptOnly) {
        return Eigen::MatrixXd::Ones(X.n(), 1);
    }
    return X.values;
}

double zip_joint_log_likelihood(const Eigen::VectorXd& beta,
                                const Eigen::VectorXd& gamma,
                                const Eigen::MatrixXd& X,
                                const Eigen::MatrixXd& Z,
                                const Eigen::VectorXd& y) {
    Eigen::VectorXd pi(Z.rows());
    const Eigen::VectorXd zeta = Z * gamma;
    for (Eigen::Index i = 0; i < pi.size(); ++i) {
        pi[i] = expit(zeta[i]);
    }
    return zip_log_likelihood(beta, pi, X, y);
}

Eigen::VectorXd zip_joint_score(const Eigen::VectorXd& beta,
                                const Eigen::VectorXd& gamma,
                                const Eigen::MatrixXd& X,
                                const Eigen::MatrixXd& Z,
                                const Eigen::VectorXd& y) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const Eigen::Index q = Z.cols();
    const Eigen::VectorXd eta = X * beta;
    const Eigen::VectorXd zeta = Z * gamma;
    std::vector<KahanSum> acc(static_cast<std::size_t>(p + q));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = std::exp(eta[i]);
        const double pi = expit(zeta[i]);
        double dbeta, dgamma;
        if (y[i] == 0.0) {
            const double em = std::exp(-mu);
            const double denom = pi + (1.0 - pi) * em;
            dbeta = -(1.0 - pi) * em * mu / denom;
            dgamma = (1.0 - em) * pi * (1.0 - pi) / denom;
        } else {
            dbeta = y[i] - mu;
            dgamma = -pi;
        }
        for (Eigen::Index j = 0; j < p; ++j) {
            acc[static_cast<std::size_t>(j)].add(dbeta * X(i, j));
        }
        for (Eigen::Index j = 0; j < q; ++j) {
            acc[static_cast<std::size_t>(p + j)].add(dgamma * Z(i, j));
        }
    }
    Eigen::VectorXd s(p + q);
    for (Eigen::Index j = 0; j < p + q; ++j) {
        s[j] = acc[static_cast<std::size_t>(j)].total();
    }
    return s;
}

} // namespace detail

ZipFitResult fit_zip(const DesignMatrix& X, const Eigen::VectorXd& y,
                     ZeroModel zero_spec, const ZipEmOptions& opts) {
    X.validate();
    if (y.size() != X.n()) {
        throw ContractError("outcome length does not match design rows");
    }
    const Eigen::MatrixXd Z = detail::zero_design(X, zero_spec);
    const Eigen::Index n = X.n();
    const Eigen::Index p = X.p();
    const Eigen::Index q = Z.cols();
    if (n < p + q) {
        throw ContractError("need n >= p + q observations for the joint ZIP fit");
    }

    Eigen::Index n_zero = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(y[i]) || y[i] < 0.0) {
            throw ContractError("count outcome must be finite and nonnegative (row " +
                                std::to_string(i) + ")");
        }
        if (y[i] == 0.0) {
            ++n_zero;
        }
    }
    if (n_zero == 0) {
        throw DomainError("no zero outcomes: the zero-inflated model is unidentified; "
                          "fit the plain Poisson model instead");
    }
    if (n_zero == n) {
        throw DomainError("all outcomes are zero: the Poisson portion is unidentified");
    }

    // count part starts at the plain Poisson fit, zero part at a shrunk
    // logistic fit of the zero indicator
    GlmOptions inner;
    inner.max_iter = opts.max_mstep_iter;
    FitResult pois = detail::fit_poisson_weighted(X, y, Eigen::VectorXd::Ones(n),
                                                  inner, nullptr, true);
    Eigen::VectorXd beta = pois.beta.values;

    Eigen::VectorXd zero_ind(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        zero_ind[i] = y[i] == 0.0 ? 1.0 : 0.0;
    }
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(q);
    gamma[0] = std::log(static_cast<double>(n_zero) /
                        static_cast<double>(n - n_zero));
    gamma = fit_logistic(Z, zero_ind, gamma, 25);
    gamma *= 0.5;

    ZipFitResult result;
    result.zero_model = zero_spec;
    result.count_beta.labels = X.labels;
    if (zero_spec == ZeroModel::InterceptOnly) {
        result.zero_gamma.labels = {"intercept"};
    } else {
        result.zero_gamma.labels = X.labels;
    }

    double ll = detail::zip_joint_log_likelihood(beta, gamma, X.values, Z, y);
    result.ll_path.push_back(ll);

    const double clamp_lo = opts.weight_clamp;
    const double clamp_hi = 1.0 - opts.weight_clamp;
    Eigen::VectorXd w(n);

    bool em_converged = false;
    int em_iter = 0;
    for (; em_iter < opts.max_em_iter; ++em_iter) {
        // E-step: posterior probability of a structural zero
        const Eigen::VectorXd eta = X.values * beta;
        const Eigen::VectorXd zeta = Z * gamma;
        for (Eigen::Index i = 0; i < n; ++i) {
            double wi = 0.0;
            if (y[i] == 0.0) {
                const double pi = expit(zeta[i]);
                const double em = std::exp(-std::exp(eta[i]));
                wi = pi / (pi + (1.0 - pi) * em);
            }
            w[i] = std::min(std::max(wi, clamp_lo), clamp_hi);
        }

        // M-steps: weighted Poisson for the count part, weighted logistic for
        // the zero part
        const Eigen::VectorXd count_w = Eigen::VectorXd::Ones(n) - w;
        FitResult mstep = detail::fit_poisson_weighted(X, y, count_w, inner, &beta, false);
        const Eigen::VectorXd beta_new = mstep.beta.values;
        const Eigen::VectorXd gamma_new = fit_logistic(Z, w, gamma, opts.max_mstep_iter);

        const double param_change =
            std::max((beta_new - beta).lpNorm<Eigen::Infinity>(),
                     (gamma_new - gamma).lpNorm<Eigen::Infinity>());
        beta = beta_new;
        gamma = gamma_new;

        const double ll_new = detail::zip_joint_log_likelihood(beta, gamma, X.values, Z, y);
        const double rel_change = std::abs(ll_new - ll) / (std::abs(ll_new) + 1.0);
        ll = ll_new;
        result.ll_path.push_back(ll);

        if (rel_change < opts.ll_rel_tol && param_change < opts.param_tol) {
            em_converged = true;
            ++em_iter;
            break;
        }
    }

    // Newton polish on the analytic joint score: EM is linearly convergent,
    // the polish drives the score to machine scale so downstream identities
    // (intercept-only moment equations) hold tightly.
    const double n_d = static_cast<double>(n);
    if (opts.polish) {
        const Eigen::Index m = p + q;
        for (int iter = 0; iter < opts.max_polish_iter; ++iter) {
            Eigen::VectorXd theta(m);
            theta.head(p) = beta;
            theta.tail(q) = gamma;
            const Eigen::VectorXd s =
                detail::zip_joint_score(beta, gamma, X.values, Z, y);
            if (s.lpNorm<Eigen::Infinity>() / n_d < opts.polish_score_tol) {
                break;
            }
            Eigen::MatrixXd H(m, m);
            const double h = 1e-6;
            for (Eigen::Index j = 0; j < m; ++j) {
                Eigen::VectorXd tp = theta, tm = theta;
                tp[j] += h;
                tm[j] -= h;
                const Eigen::VectorXd sp =
                    detail::zip_joint_score(tp.head(p), tp.tail(q), X.values, Z, y);
                const Eigen::VectorXd sm =
                    detail::zip_joint_score(tm.head(p), tm.tail(q), X.values, Z, y);
                H.col(j) = (sp - sm) / (2.0 * h);
            }
            H = 0.5 * (H + H.transpose().eval());
            Eigen::VectorXd step = Eigen::LDLT<Eigen::MatrixXd>(H).solve(-s);
            if (!step.allFinite()) {
                break;
            }
            double t = 1.0;
            bool improved = false;
            for (int hstep = 0; hstep < 30; ++hstep) {
                const Eigen::VectorXd cand = theta + t * step;
                const double cand_ll = detail::zip_joint_log_likelihood(
                    cand.head(p), cand.tail(q), X.values, Z, y);
                if (std::isfinite(cand_ll) && cand_ll >= ll - 1e-12) {
                    beta = cand.head(p);
                    gamma = cand.tail(q);
                    improved = cand_ll > ll || t == 1.0;
                    ll = cand_ll;
                    break;
                }
                t *= 0.5;
            }
            result.ll_path.push_back(ll);
            if (!improved) {
                break;
            }
        }
    }

    const Eigen::VectorXd final_score =
        detail::zip_joint_score(beta, gamma, X.values, Z, y);
    result.joint_score_norm = final_score.lpNorm<Eigen::Infinity>() / n_d;
    result.count_beta.values = beta;
    result.zero_gamma.values = gamma;
    result.log_likelihood = ll;
    result.em_iterations = em_iter;
    result.converged = result.joint_score_norm < 1e-6;

    if (!em_converged && !result.converged) {
        std::ostringstream msg;
        msg << "ZIP EM did not converge in " << opts.max_em_iter
            << " iterations; mean joint score max-norm = " << result.joint_score_norm
            << ", log-likelihood = " << ll;
        throw NumericalError(msg.str());
    }

    try {
        result.covariance = zip_covariance(result, X, y);
        result.covariance_available = true;
    } catch (const NumericalError&) {
        result.covariance_available = false;
    }
    return result;
}

Eigen::MatrixXd zip_covariance(const ZipFitResult& fit, const DesignMatrix& X,
                               const Eigen::VectorXd& y) {
    const Eigen::MatrixXd Z = detail::zero_design(X, fit.zero_model);
    const Eigen::Index p = fit.count_beta.values.size();
    const Eigen::Index q = fit.zero_gamma.values.size();
    const Eigen::Index m = p + q;
    Eigen::VectorXd theta(m);
    theta.head(p) = fit.count_beta.values;
    theta.tail(q) = fit.zero_gamma.values;

    Eigen::MatrixXd H(m, m);
    const double h = 1e-5;
    for (Eigen::Index j = 0; j < m; ++j) {
        Eigen::VectorXd tp = theta, tm = theta;
        tp[j] += h;
        tm[j] -= h;
        const Eigen::VectorXd sp =
            detail::zip_joint_score(tp.head(p), tp.tail(q), X.values, Z, y);
        const Eigen::VectorXd sm =
            detail::zip_joint_score(tm.head(p), tm.tail(q), X.values, Z, y);
        H.col(j) = (sp - sm) / (2.0 * h);
    }
    H = 0.5 * (H + H.transpose().eval());

    const Eigen::MatrixXd neg_h = -H;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(neg_h);
    if (!lu.isInvertible()) {
        throw NumericalError("observed information at the ZIP optimum is not invertible");
    }
    Eigen::MatrixXd cov = lu.solve(Eigen::MatrixXd::Identity(m, m));
    cov = 0.5 * (cov + cov.transpose().eval());
    for (Eigen::Index j = 0; j < m; ++j) {
        if (!std::isfinite(cov(j, j)) || cov(j, j) <= 0.0) {
            throw NumericalError("ZIP covariance diagonal is not positive");
        }
    }
    return cov;
}

} // namespace zibc
