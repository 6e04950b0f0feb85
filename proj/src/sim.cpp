#include "zibc/sim.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "zibc/brent.hpp"
#include "zibc/errors.hpp"
#include "zibc/gauss_hermite.hpp"
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

const QuadratureRule& rule64() {
    static const QuadratureRule rule = gauss_hermite(64);
    return rule;
}

// marginal P(y = 0) under the two-equation generator for a given gamma0
double zero_rate_quadrature(double gamma0, double gamma1, double gamma2,
                            const std::array<double, 3>& beta, double p_t) {
    double total = 0.0;
    for (int t = 0; t <= 1; ++t) {
        const double arm_w = t == 1 ? p_t : 1.0 - p_t;
        total += arm_w * expect_standard_normal(rule64(), [&](double z) {
            const double pi = expit(gamma0 + gamma1 * t + gamma2 * z);
            const double mu = std::exp(beta[0] + beta[1] * t + beta[2] * z);
            return pi + (1.0 - pi) * std::exp(-mu);
        });
    }
    return total;
}

} // namespace

std::vector<int> SimScenario::resolved_sizes() const {
    if (!sample_sizes.empty()) {
        if (sample_sizes.size() != static_cast<std::size_t>(k_studies)) {
            throw ContractError("sample_sizes length must equal k_studies");
        }
        return sample_sizes;
    }
    std::vector<int> sizes(static_cast<std::size_t>(k_studies));
    for (int s = 0; s < k_studies; ++s) {
        sizes[static_cast<std::size_t>(s)] = s < k_studies / 2 ? 200 : 400;
    }
    return sizes;
}

std::vector<double> SimScenario::resolved_treat_probs() const {
    if (!treat_probs.empty()) {
        if (treat_probs.size() != static_cast<std::size_t>(k_studies)) {
            throw ContractError("treat_probs length must equal k_studies");
        }
        return treat_probs;
    }
    static constexpr double cycle[3] = {0.4, 0.5, 0.6};
    std::vector<double> probs(static_cast<std::size_t>(k_studies));
    for (int s = 0; s < k_studies; ++s) {
        probs[static_cast<std::size_t>(s)] = cycle[s % 3];
    }
    return probs;
}

void SimScenario::validate() const {
    if (k_studies < 1) {
        throw ContractError("k_studies must be at least 1");
    }
    if (replications < 1) {
        throw ContractError("replications must be at least 1");
    }
    if (!(target_zero_rate > 0.0 && target_zero_rate < 1.0)) {
        throw ContractError("target_zero_rate must lie in (0, 1)");
    }
    if (workers < 1) {
        throw ContractError("workers must be at least 1");
    }
    for (double p : resolved_treat_probs()) {
        if (!(p > 0.0 && p < 1.0)) {
            throw ContractError("treatment probabilities must lie in (0, 1)");
        }
    }
    for (int n : resolved_sizes()) {
        if (n < 10) {
            throw ContractError("per-study sample sizes must be at least 10");
        }
    }
}

GammaCalibration calibrate_gamma0(double target_zero_rate, double gamma1,
                                  const std::array<double, 3>& beta, double p_t,
                                  double gamma2_factor) {
    if (!(target_zero_rate > 0.0 && target_zero_rate < 1.0)) {
        throw ContractError("target zero rate must lie in (0, 1)");
    }
    const auto f = [&](double g0) {
        return zero_rate_quadrature(g0, gamma1, gamma2_factor * g0, beta, p_t) -
               target_zero_rate;
    };
    const double lo = -20.0, hi = 20.0;
    const double flo = f(lo), fhi = f(hi);
    if ((flo > 0.0) == (fhi > 0.0)) {
        std::ostringstream msg;
        msg << "zero-rate calibration infeasible: target " << target_zero_rate
            << " outside attainable range [" << flo + target_zero_rate << ", "
            << fhi + target_zero_rate << "] for gamma0 in [-20, 20]";
        throw NumericalError(msg.str());
    }
    const RootResult root = brent_root(f, lo, hi, 1e-12);

    GammaCalibration cal;
    cal.gamma0 = root.x;
    cal.gamma1 = gamma1;
    cal.gamma2 = gamma2_factor * root.x;
    cal.achieved_zero_rate =
        zero_rate_quadrature(cal.gamma0, gamma1, cal.gamma2, beta, p_t);
    cal.quadrature_error = std::abs(cal.achieved_zero_rate - target_zero_rate);
    cal.mean_pi_treated = expect_standard_normal(rule64(), [&](double z) {
        return expit(cal.gamma0 + cal.gamma1 + cal.gamma2 * z);
    });
    cal.mean_pi_control = expect_standard_normal(rule64(), [&](double z) {
        return expit(cal.gamma0 + cal.gamma2 * z);
    });
    return cal;
}

StudyData generate_study(int n, double p_t, const std::array<double, 3>& beta,
                         const std::array<double, 3>& gamma, RngKey key) {
    if (n < 1) {
        throw ContractError("study size must be positive");
    }
    StudyData data;
    data.y.resize(n);
    data.treat.resize(n);
    data.covariate.resize(n);
    for (int i = 0; i < n; ++i) {
        key.row = static_cast<std::uint64_t>(i);
        CounterRng rng(key);
        const double t = rng.bernoulli(p_t) ? 1.0 : 0.0;
        const double z = rng.normal();
        const double pi = expit(gamma[0] + gamma[1] * t + gamma[2] * z);
        const double mu = std::exp(beta[0] + beta[1] * t + beta[2] * z);
        const bool structural_zero = rng.bernoulli(pi);
        data.treat[i] = t;
        data.covariate[i] = z;
        data.y[i] = structural_zero ? 0.0 : static_cast<double>(rng.poisson(mu));
    }
    // analysis-side convention: covariates grand-mean centered
    data.covariate_offset = data.covariate.mean();
    data.covariate.array() -= data.covariate_offset;
    return data;
}

namespace {

StudyFit fit_one_study(const SimScenario& scenario, const GammaCalibration& cal,
                       int rep_index, int study_index, int n, double p_t) {
    StudyFit fit;
    const RngKey key{scenario.seed, static_cast<std::uint64_t>(rep_index),
                     static_cast<std::uint64_t>(study_index), 0};
    const StudyData data = generate_study(
        n, p_t, {scenario.beta0, scenario.beta1, scenario.beta2},
        {cal.gamma0, cal.gamma1, cal.gamma2}, key);

    try {
        Eigen::MatrixXd cov(n, 1);
        cov.col(0) = data.covariate;
        const DesignMatrix X = DesignMatrix::trial(data.treat, cov, {"cov"});

        const FitResult pois = fit_poisson(X, data.y);
        fit.beta1_cv = pois.beta.values[1];
        fit.se1_cv = std::sqrt(pois.covariance(1, 1));

        const ZipFitResult zip = fit_zip(X, data.y, scenario.zero_model);
        if (!zip.covariance_available) {
            throw NumericalError("ZIP covariance unavailable");
        }
        fit.beta1_mle = zip.count_beta.values[1];
        fit.se1_mle = std::sqrt(zip.covariance(1, 1));

        // exact aggregate summaries feed the correction
        StudySummary summary;
        summary.study_id = "study_" + std::to_string(study_index + 1);
        long n_c = 0, n_t = 0, zero_c = 0, zero_t = 0;
        double sum_c = 0.0, sum_t = 0.0;
        for (int i = 0; i < n; ++i) {
            if (data.treat[i] == 1.0) {
                ++n_t;
                sum_t += data.y[i];
                zero_t += data.y[i] == 0.0 ? 1 : 0;
            } else {
                ++n_c;
                sum_c += data.y[i];
                zero_c += data.y[i] == 0.0 ? 1 : 0;
            }
        }
        summary.n_c = n_c;
        summary.n_t = n_t;
        summary.ybar_c = n_c > 0 ? sum_c / static_cast<double>(n_c) : 0.0;
        summary.ybar_t = n_t > 0 ? sum_t / static_cast<double>(n_t) : 0.0;
        summary.p0_c = n_c > 0 ? static_cast<double>(zero_c) / static_cast<double>(n_c) : 1.0;
        summary.p0_t = n_t > 0 ? static_cast<double>(zero_t) / static_cast<double>(n_t) : 1.0;
        summary.beta1_cv = fit.beta1_cv;
        summary.se1_cv = fit.se1_cv;
        fit.summary = summary;
        fit.correction = correct_study(summary);
        fit.ok = true;
    } catch (const std::exception& e) {
        fit.ok = false;
        fit.failure = e.what();
    }
    return fit;
}

ReplicationResult run_replication_impl(const SimScenario& scenario,
                                       const GammaCalibration& cal,
                                       int rep_index) {
    const auto sizes = scenario.resolved_sizes();
    const auto probs = scenario.resolved_treat_probs();

    ReplicationResult rep;
    rep.studies.reserve(static_cast<std::size_t>(scenario.k_studies));
    std::vector<StudyEffect> eff_true, eff_cv, eff_zibc;
    for (int s = 0; s < scenario.k_studies; ++s) {
        StudyFit fit = fit_one_study(scenario, cal, rep_index, s,
                                     sizes[static_cast<std::size_t>(s)],
                                     probs[static_cast<std::size_t>(s)]);
        if (fit.ok) {
            const std::string id = fit.summary.study_id;
            eff_true.push_back({id, fit.beta1_mle, fit.se1_mle, "true"});
            eff_cv.push_back({id, fit.beta1_cv, fit.se1_cv, "conventional"});
            eff_zibc.push_back({id, fit.correction.beta1_zibc, fit.correction.se1, "zibc"});
        } else {
            rep.flagged = true;
        }
        rep.studies.push_back(std::move(fit));
    }
    if (!eff_true.empty()) {
        rep.pooled_true = pool_random_effects(eff_true);
        rep.pooled_cv = pool_random_effects(eff_cv);
        rep.pooled_zibc = pool_random_effects(eff_zibc);
    } else {
        rep.flagged = true;
    }
    return rep;
}

} // namespace

ReplicationResult run_replication(const SimScenario& scenario,
                                  const GammaCalibration& calibration,
                                  int rep_index) {
    scenario.validate();
    return run_replication_impl(scenario, calibration, rep_index);
}

ReplicationResult run_replication(const SimScenario& scenario, int rep_index) {
    scenario.validate();
    const auto probs = scenario.resolved_treat_probs();
    double mean_p = 0.0;
    for (double p : probs) mean_p += p;
    mean_p /= static_cast<double>(probs.size());
    const GammaCalibration cal = calibrate_gamma0(
        scenario.target_zero_rate, scenario.gamma1,
        {scenario.beta0, scenario.beta1, scenario.beta2}, mean_p,
        scenario.gamma2_factor);
    return run_replication_impl(scenario, cal, rep_index);
}

SimReport run_simulation(const SimScenario& scenario) {
    scenario.validate();
    const auto probs = scenario.resolved_treat_probs();
    double mean_p = 0.0;
    for (double p : probs) mean_p += p;
    mean_p /= static_cast<double>(probs.size());

    SimReport report;
    report.scenario = scenario;
    report.calibration = calibrate_gamma0(
        scenario.target_zero_rate, scenario.gamma1,
        {scenario.beta0, scenario.beta1, scenario.beta2}, mean_p,
        scenario.gamma2_factor);

    const int R = scenario.replications;
    std::vector<ReplicationResult> reps(static_cast<std::size_t>(R));
    const int n_threads = std::min(scenario.workers, R);
    if (n_threads <= 1) {
        for (int r = 0; r < R; ++r) {
            reps[static_cast<std::size_t>(r)] =
                run_replication_impl(scenario, report.calibration, r);
        }
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    const int r = next.fetch_add(1);
                    if (r >= R) {
                        return;
                    }
                    reps[static_cast<std::size_t>(r)] =
                        run_replication_impl(scenario, report.calibration, r);
                }
            });
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    // ordered reduction over replication index
    double cov_t = 0, cov_c = 0, cov_z = 0;
    double mse_t = 0, mse_c = 0, mse_z = 0;
    double se_t = 0, se_c = 0, se_z = 0;
    double d1 = 0, d1_hat = 0, pi_t = 0, pi_c = 0, b_cv = 0, b_mle = 0, b_z = 0;
    long n_used = 0;
    long n_studies = 0;
    for (int r = 0; r < R; ++r) {
        const ReplicationResult& rep = reps[static_cast<std::size_t>(r)];
        if (rep.flagged) {
            report.flagged_replications.push_back(r);
            continue;
        }
        ++n_used;
        const double b1 = scenario.beta1;
        cov_t += rep.pooled_true.ci_low <= b1 && b1 <= rep.pooled_true.ci_high;
        cov_c += rep.pooled_cv.ci_low <= b1 && b1 <= rep.pooled_cv.ci_high;
        cov_z += rep.pooled_zibc.ci_low <= b1 && b1 <= rep.pooled_zibc.ci_high;
        mse_t += (rep.pooled_true.pooled_effect - b1) * (rep.pooled_true.pooled_effect - b1);
        mse_c += (rep.pooled_cv.pooled_effect - b1) * (rep.pooled_cv.pooled_effect - b1);
        mse_z += (rep.pooled_zibc.pooled_effect - b1) * (rep.pooled_zibc.pooled_effect - b1);
        se_t += rep.pooled_true.pooled_se;
        se_c += rep.pooled_cv.pooled_se;
        se_z += rep.pooled_zibc.pooled_se;
        for (const StudyFit& fit : rep.studies) {
            ++n_studies;
            d1 += fit.beta1_mle - fit.beta1_cv;
            d1_hat += fit.correction.delta1_hat;
            pi_t += fit.correction.treated.pi_bar;
            pi_c += fit.correction.control.pi_bar;
            b_cv += fit.beta1_cv;
            b_mle += fit.beta1_mle;
            b_z += fit.correction.beta1_zibc;
        }
    }
    report.replications_used = static_cast<int>(n_used);
    if (n_used > 0) {
        const double dn = static_cast<double>(n_used);
        // APRD compares the averaged pooled standard errors against the
        // gold-standard method's average
        const double avg_se_t = se_t / dn;
        const double avg_se_c = se_c / dn;
        const double avg_se_z = se_z / dn;
        report.true_method = {cov_t / dn, mse_t / dn, avg_se_t, 0.0};
        report.conventional = {cov_c / dn, mse_c / dn, avg_se_c,
                               std::abs(avg_se_c - avg_se_t) / avg_se_t};
        report.zibc = {cov_z / dn, mse_z / dn, avg_se_z,
                       std::abs(avg_se_z - avg_se_t) / avg_se_t};
    }
    if (n_studies > 0) {
        const double ds = static_cast<double>(n_studies);
        report.avg_delta1 = d1 / ds;
        report.avg_delta1_hat = d1_hat / ds;
        report.avg_pi_t = pi_t / ds;
        report.avg_pi_c = pi_c / ds;
        report.avg_beta1_cv = b_cv / ds;
        report.avg_beta1_mle = b_mle / ds;
        report.avg_beta1_zibc = b_z / ds;
    }
    return report;
}

} // namespace zibc
