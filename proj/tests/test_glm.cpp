#include <doctest.h>

#include <cmath>
#include <random>

#include "zibc/distributions.hpp"
#include "zibc/errors.hpp"
#include "zibc/glm_poisson.hpp"
#include "test_utils.hpp"

using namespace zibc;

namespace {

// coarse-to-fine grid maximization of the Poisson log-likelihood, independent
// of the IRLS path
Eigen::VectorXd grid_search_mle(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    Eigen::VectorXd center(3);
    center << std::log(y.mean()), 0.0, 0.0;
    double half_width = 1.5;
    for (int round = 0; round < 8; ++round) {
        Eigen::VectorXd best = center;
        double best_ll = -std::numeric_limits<double>::infinity();
        const int steps = 10;
        for (int a = 0; a <= steps; ++a) {
            for (int b = 0; b <= steps; ++b) {
                for (int c = 0; c <= steps; ++c) {
                    Eigen::VectorXd cand(3);
                    cand << center[0] + half_width * (2.0 * a / steps - 1.0),
                        center[1] + half_width * (2.0 * b / steps - 1.0),
                        center[2] + half_width * (2.0 * c / steps - 1.0);
                    const double ll = poisson_log_likelihood(cand, X, y);
                    if (ll > best_ll) {
                        best_ll = ll;
                        best = cand;
                    }
                }
            }
        }
        center = best;
        half_width *= 0.4;
    }
    return center;
}

} // namespace

TEST_CASE("intercept-only Poisson fit matches the closed form") {
    DesignMatrix X = DesignMatrix::intercept_only(4);
    Eigen::VectorXd y(4);
    y << 0, 1, 2, 3;
    const FitResult fit = fit_poisson(X, y);
    CHECK(fit.converged);
    CHECK(fit.beta.values[0] == doctest::Approx(std::log(1.5)).epsilon(1e-10));
    const Eigen::VectorXd se = standard_errors(fit);
    CHECK(se[0] == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-10));
    CHECK(score_cv(fit.beta.values, X.values, y).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("two-group fit matches the saturated closed form") {
    // control mean 2, treated mean 1
    Eigen::VectorXd treat(8), y(8);
    treat << 0, 0, 0, 0, 1, 1, 1, 1;
    y << 1, 2, 3, 2, 0, 1, 1, 2;
    const DesignMatrix X = DesignMatrix::trial(treat, Eigen::MatrixXd(8, 0), {});
    const FitResult fit = fit_poisson(X, y);
    CHECK(fit.converged);
    CHECK(fit.beta.values[0] == doctest::Approx(std::log(2.0)).epsilon(1e-10));
    CHECK(fit.beta.values[1] == doctest::Approx(std::log(0.5)).epsilon(1e-10));
    const Eigen::VectorXd se = standard_errors(fit);
    // delta-method closed form sqrt(1/(nC ybarC) + 1/(nT ybarT))
    CHECK(se[1] ==
          doctest::Approx(std::sqrt(1.0 / (4 * 2.0) + 1.0 / (4 * 1.0))).epsilon(1e-10));
}

TEST_CASE("fit matches an independent grid-search oracle on ZIP data") {
    const auto trial = test_util::make_zip_trial(50, 0.8, -0.4, 0.3, 0.25, 0.35, 1234);
    const DesignMatrix X = test_util::trial_design(trial);
    const FitResult fit = fit_poisson(X, trial.y);
    CHECK(fit.converged);
    const Eigen::VectorXd oracle = grid_search_mle(X.values, trial.y);
    CHECK((fit.beta.values - oracle).lpNorm<Eigen::Infinity>() < 1e-3);
}

TEST_CASE("reported SE agrees with a parametric bootstrap oracle") {
    const auto trial = test_util::make_zip_trial(400, 1.0, -0.5, 0.25, 0.0, 0.0, 777);
    const DesignMatrix X = test_util::trial_design(trial);
    const FitResult fit = fit_poisson(X, trial.y);
    const double se1 = standard_errors(fit)[1];

    // resample outcomes from the fitted model and refit
    const Eigen::VectorXd mu = (X.values * fit.beta.values).array().exp();
    std::mt19937 rng(4242);
    const int B = 2000;
    double sum = 0.0, sum2 = 0.0;
    for (int b = 0; b < B; ++b) {
        Eigen::VectorXd yb(400);
        for (int i = 0; i < 400; ++i) {
            std::poisson_distribution<long> pois(mu[i]);
            yb[i] = static_cast<double>(pois(rng));
        }
        const FitResult fb = fit_poisson(X, yb);
        sum += fb.beta.values[1];
        sum2 += fb.beta.values[1] * fb.beta.values[1];
    }
    const double boot_se = std::sqrt((sum2 - sum * sum / B) / (B - 1));
    CHECK(std::abs(se1 - boot_se) / boot_se < 0.02);
}

TEST_CASE("treatment coefficient is invariant to shifting a centered covariate") {
    const auto trial = test_util::make_zip_trial(200, 1.1, -0.3, 0.2, 0.15, 0.25, 99);
    const DesignMatrix X = test_util::trial_design(trial);
    const FitResult fit = fit_poisson(X, trial.y);

    Eigen::MatrixXd shifted(trial.cov.size(), 1);
    shifted.col(0) = trial.cov.array() + 3.0;
    const DesignMatrix X2 = DesignMatrix::trial(trial.treat, shifted, {"cov"});
    const FitResult fit2 = fit_poisson(X2, trial.y);

    CHECK(std::abs(fit.beta.values[1] - fit2.beta.values[1]) < 1e-8);
    CHECK(std::abs(fit.beta.values[2] - fit2.beta.values[2]) < 1e-8);
    CHECK(fit.beta.values[0] != doctest::Approx(fit2.beta.values[0]).epsilon(1e-6));
}

TEST_CASE("IRLS log-likelihood path is nondecreasing") {
    const auto trial = test_util::make_zip_trial(150, 0.9, -0.2, 0.25, 0.3, 0.4, 5150);
    const DesignMatrix X = test_util::trial_design(trial);
    const FitResult fit = fit_poisson(X, trial.y);
    REQUIRE(fit.ll_path.size() > 1);
    for (std::size_t i = 1; i < fit.ll_path.size(); ++i) {
        CHECK(fit.ll_path[i] >= fit.ll_path[i - 1] - 1e-9);
    }
    CHECK(fit.log_likelihood == doctest::Approx(fit.ll_path.back()));
}

TEST_CASE("score residual is tiny at every converged fit") {
    for (unsigned seed : {11u, 22u, 33u, 44u}) {
        const auto trial = test_util::make_zip_trial(120, 1.0, -0.4, 0.2, 0.2, 0.35, seed);
        const DesignMatrix X = test_util::trial_design(trial);
        const FitResult fit = fit_poisson(X, trial.y);
        CHECK(fit.converged);
        CHECK(score_cv(fit.beta.values, X.values, trial.y).lpNorm<Eigen::Infinity>() <
              1e-8);
    }
}

TEST_CASE("degenerate inputs raise the documented errors") {
    // rank-deficient design names the offending column
    Eigen::VectorXd treat(6), y(6);
    treat << 0, 1, 0, 1, 0, 1;
    y << 1, 2, 0, 3, 2, 1;
    Eigen::MatrixXd cov(6, 2);
    cov.col(0) << 0.5, -0.5, 1.0, -1.0, 0.2, -0.2;
    cov.col(1) = 2.0 * cov.col(0); // exact collinearity
    const DesignMatrix X = DesignMatrix::trial(treat, cov, {"cov1", "cov2"});
    try {
        fit_poisson(X, y);
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        // either member of the collinear pair identifies the problem
        const std::string msg = e.what();
        CHECK(msg.find("linearly dependent") != std::string::npos);
        CHECK((msg.find("cov1") != std::string::npos ||
               msg.find("cov2") != std::string::npos));
    }

    // all-zero outcome has no finite MLE
    const DesignMatrix X0 = DesignMatrix::intercept_only(5);
    CHECK_THROWS_AS(fit_poisson(X0, Eigen::VectorXd::Zero(5)), DomainError);

    // exhausted iteration budget raises a diagnostic error
    const auto trial = test_util::make_zip_trial(80, 1.0, -0.4, 0.2, 0.2, 0.35, 3);
    const DesignMatrix Xt = test_util::trial_design(trial);
    GlmOptions one_iter;
    one_iter.max_iter = 1;
    CHECK_THROWS_AS(fit_poisson(Xt, trial.y, one_iter), NumericalError);

    // standard errors demand convergence and a sane covariance
    FitResult doctored;
    doctored.converged = false;
    CHECK_THROWS_AS(standard_errors(doctored), ContractError);
    doctored.converged = true;
    doctored.covariance = Eigen::MatrixXd::Identity(2, 2);
    doctored.covariance(1, 1) = -1.0;
    CHECK_THROWS_AS(standard_errors(doctored), NumericalError);
}

TEST_CASE("saturating the linear-predictor clamp flags the fit instead of throwing") {
    DesignMatrix X = DesignMatrix::intercept_only(4);
    Eigen::VectorXd y = Eigen::VectorXd::Constant(4, 4.0e15); // log mean ~ 35.9 > 30
    const FitResult fit = fit_poisson(X, y);
    CHECK_FALSE(fit.converged);
    CHECK(fit.eta_clamped);
}
