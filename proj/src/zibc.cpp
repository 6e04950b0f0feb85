#include "zibc/zibc.hpp"

#include <cmath>
#include <string>

#include "zibc/brent.hpp"
#include "zibc/errors.hpp"

namespace zibc {

namespace {

constexpr double kPiCap = 1.0 - 1e-9;

void require_finite(double v, const std::string& study, const std::string& field) {
    if (!std::isfinite(v)) {
        throw ContractError("study '" + study + "': field '" + field + "' is not finite");
    }
}

} // namespace

void StudySummary::validate() const {
    require_finite(ybar_c, study_id, "ybar_c");
    require_finite(ybar_t, study_id, "ybar_t");
    require_finite(p0_c, study_id, "p0_c");
    require_finite(p0_t, study_id, "p0_t");
    require_finite(beta1_cv, study_id, "beta1_cv");
    require_finite(se1_cv, study_id, "se1_cv");
    if (n_c < 2 || n_t < 2) {
        throw ContractError("study '" + study_id + "': arm sizes must be at least 2");
    }
    if (se1_cv <= 0.0) {
        throw ContractError("study '" + study_id + "': se1_cv must be positive");
    }
    if (p0_c < 0.0 || p0_c > 1.0 || p0_t < 0.0 || p0_t > 1.0) {
        throw ContractError("study '" + study_id +
                            "': zero proportions must lie in [0, 1]");
    }
    // degenerate arms are domain errors so callers can skip rather than abort
    if (ybar_c <= 0.0) {
        throw DomainError("study '" + study_id +
                          "', control arm: outcome mean must be positive");
    }
    if (ybar_t <= 0.0) {
        throw DomainError("study '" + study_id +
                          "', treated arm: outcome mean must be positive");
    }
    if (p0_c >= 1.0) {
        throw DomainError("study '" + study_id +
                          "', control arm: zero proportion must be below 1");
    }
    if (p0_t >= 1.0) {
        throw DomainError("study '" + study_id +
                          "', treated arm: zero proportion must be below 1");
    }
}

ZeroRateSolution solve_zero_rate(double ybar, double p0) {
    if (!std::isfinite(ybar) || !std::isfinite(p0)) {
        throw DomainError("zero-rate solver inputs must be finite");
    }
    if (ybar <= 0.0) {
        throw DomainError("degenerate arm: outcome mean must be positive, got " +
                          std::to_string(ybar));
    }
    if (p0 >= 1.0 || p0 < 0.0) {
        throw DomainError("degenerate arm: zero proportion must lie in [0, 1), got " +
                          std::to_string(p0));
    }

    const auto g = [&](double pi) {
        return pi + (1.0 - pi) * std::exp(-ybar / (1.0 - pi)) - p0;
    };

    ZeroRateSolution sol;
    if (p0 <= std::exp(-ybar)) {
        // a plain Poisson with mean ybar already explains the zeros
        sol.pi_bar = 0.0;
        sol.mu_bar = ybar;
        sol.clamped = true;
        sol.residual = {0.0, g(0.0)};
        return sol;
    }

    // g(0) = e^{-ybar} - p0 < 0 and g(pi -> 1) -> 1 - p0 > 0: bracket is analytic
    const RootResult root = brent_root(g, 0.0, kPiCap, 1e-12);
    double pi = root.x;

    // one Newton touch-up pushes the zero-equation residual to machine scale
    for (int i = 0; i < 2; ++i) {
        const double om = 1.0 - pi;
        const double mu = ybar / om;
        const double e = std::exp(-mu);
        const double gval = pi + om * e - p0;
        const double gprime = 1.0 - e * (1.0 + mu);
        if (gprime == 0.0) {
            break;
        }
        const double next = pi - gval / gprime;
        if (!(next >= 0.0 && next <= kPiCap)) {
            break;
        }
        pi = next;
    }

    sol.pi_bar = pi;
    sol.mu_bar = ybar / (1.0 - pi);
    sol.clamped = false;
    sol.residual = {(1.0 - pi) * sol.mu_bar - ybar, g(pi)};
    return sol;
}

double delta1(double pi_t, double pi_c) {
    if (!(pi_t >= 0.0 && pi_t < 1.0) || !(pi_c >= 0.0 && pi_c < 1.0)) {
        throw DomainError("structural zero rates must lie in [0, 1)");
    }
    return -std::log1p(-pi_t) + std::log1p(-pi_c);
}

double correct_intercept(double beta0_cv, double pi_bar) {
    if (!(pi_bar >= 0.0 && pi_bar < 1.0)) {
        throw DomainError("structural zero rate must lie in [0, 1)");
    }
    return beta0_cv - std::log1p(-pi_bar);
}

double wald_p_value(double effect, double se) {
    if (se <= 0.0 || !std::isfinite(se)) {
        throw DomainError("standard error must be positive");
    }
    const double z = std::abs(effect) / se;
    return std::erfc(z / std::sqrt(2.0));
}

CorrectionResult correct_study(const StudySummary& summary) {
    summary.validate();
    CorrectionResult out;
    try {
        out.control = solve_zero_rate(summary.ybar_c, summary.p0_c);
    } catch (const DomainError& e) {
        throw DomainError("study '" + summary.study_id + "', control arm: " + e.what());
    }
    try {
        out.treated = solve_zero_rate(summary.ybar_t, summary.p0_t);
    } catch (const DomainError& e) {
        throw DomainError("study '" + summary.study_id + "', treated arm: " + e.what());
    }
    out.delta1_hat = delta1(out.treated.pi_bar, out.control.pi_bar);
    out.beta1_zibc = summary.beta1_cv + out.delta1_hat;
    out.se1 = summary.se1_cv;
    out.wald_p = wald_p_value(out.beta1_zibc, out.se1);
    return out;
}

Eigen::VectorXd bias_equation_residual(const Eigen::VectorXd& delta,
                                       const Eigen::VectorXd& beta_star,
                                       const Eigen::VectorXd& pi,
                                       const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (delta.size() != p || beta_star.size() != p) {
        throw ContractError("coefficient length does not match design columns");
    }
    if (pi.size() != n) {
        throw ContractError("zero-rate vector length does not match design rows");
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double xd = X.row(i).dot(delta);
        const double xb = X.row(i).dot(beta_star);
        const double factor = ((1.0 - pi[i]) * std::exp(xd) - 1.0) * std::exp(xb);
        out += factor * X.row(i).transpose();
    }
    return out / static_cast<double>(n);
}

Eigen::VectorXd q_gradient(const Eigen::VectorXd& beta,
                           const Eigen::VectorXd& beta0,
                           double pi_bar,
                           const Eigen::VectorXd& xbar,
                           const Eigen::MatrixXd& X) {
    const Eigen::Index p = X.cols();
    if (beta.size() != p || beta0.size() != p || xbar.size() != p) {
        throw ContractError("coefficient length does not match design columns");
    }
    if (!(pi_bar >= 0.0 && pi_bar < 1.0)) {
        throw DomainError("structural zero rate must lie in [0, 1)");
    }
    const double bracket =
        (1.0 - pi_bar) * std::exp(xbar.dot(beta0 - beta)) - 1.0;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        sum += std::exp(X.row(i).dot(beta)) * X.row(i).transpose();
    }
    return bracket * sum;
}

} // namespace zibc
