#include "zibc/cli_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "zibc/csv.hpp"
#include "zibc/errors.hpp"
#include "zibc/forest_plot.hpp"
#include "zibc/glm_poisson.hpp"
#include "zibc/zip_em.hpp"

namespace zibc {

namespace {

using ordered_json = nlohmann::ordered_json;

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ContractError(path.string() + ": cannot open file for writing");
    }
    out << content;
    if (!out) {
        throw ContractError(path.string() + ": write failed");
    }
}

void write_json_file(const std::filesystem::path& path, const ordered_json& doc) {
    write_text_file(path, doc.dump(2) + "\n");
}

std::filesystem::path ensure_out_dir(const std::string& out_dir) {
    std::filesystem::path dir(out_dir.empty() ? "." : out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw ContractError("cannot create output directory '" + dir.string() + "'");
    }
    return dir;
}

ZeroModel parse_zero_model(const std::string& s) {
    if (s == "full") {
        return ZeroModel::FullCovariates;
    }
    if (s == "intercept") {
        return ZeroModel::InterceptOnly;
    }
    throw ContractError("zero model must be 'full' or 'intercept', got '" + s + "'");
}

ordered_json meta_to_json(const MetaResult& meta) {
    ordered_json j;
    j["k"] = meta.k;
    j["pooled_effect"] = meta.pooled_effect;
    j["pooled_se"] = meta.pooled_se;
    j["tau2"] = meta.tau2;
    j["ci_low"] = meta.ci_low;
    j["ci_high"] = meta.ci_high;
    j["q_statistic"] = meta.q_statistic;
    j["weights"] = meta.weights;
    return j;
}

std::vector<double> parse_double_list(const std::string& value, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw ContractError("scenario key '" + key + "': invalid number '" + item + "'");
        }
    }
    if (out.empty()) {
        throw ContractError("scenario key '" + key + "': empty list");
    }
    return out;
}

ScenarioFile scenario_from_json(const std::string& path, const ordered_json& doc) {
    ScenarioFile out;
    SimScenario& sc = out.scenario;
    for (const auto& [key, value] : doc.items()) {
        if (key == "k_studies") {
            sc.k_studies = value.get<int>();
        } else if (key == "beta0") {
            sc.beta0 = value.get<double>();
        } else if (key == "beta1") {
            sc.beta1 = value.get<double>();
        } else if (key == "beta2") {
            sc.beta2 = value.get<double>();
        } else if (key == "gamma1") {
            sc.gamma1 = value.get<double>();
        } else if (key == "target_zero_rate") {
            sc.target_zero_rate = value.get<double>();
        } else if (key == "replications") {
            sc.replications = value.get<int>();
        } else if (key == "seed") {
            sc.seed = value.get<std::uint64_t>();
            out.has_seed = true;
        } else if (key == "sample_sizes") {
            sc.sample_sizes = value.get<std::vector<int>>();
        } else if (key == "treat_probs") {
            sc.treat_probs = value.get<std::vector<double>>();
        } else if (key == "zero_model") {
            sc.zero_model = parse_zero_model(value.get<std::string>());
        } else if (key == "gamma2_factor") {
            sc.gamma2_factor = value.get<double>();
        } else if (key == "workers") {
            sc.workers = value.get<int>();
        } else {
            throw ContractError(path + ": unknown scenario key '" + key + "'");
        }
    }
    return out;
}

} // namespace

ScenarioFile parse_scenario_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ContractError(path + ": cannot open scenario file");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    const auto first_char = text.find_first_not_of(" \t\r\n");
    if (first_char == std::string::npos) {
        throw ContractError(path + ": scenario file is empty");
    }
    if (text[first_char] == '{') {
        ordered_json doc;
        try {
            doc = ordered_json::parse(text);
        } catch (const std::exception& e) {
            throw ContractError(path + ": invalid JSON: " + e.what());
        }
        return scenario_from_json(path, doc);
    }

    // flat key=value lines, '#' comments
    ScenarioFile out;
    SimScenario& sc = out.scenario;
    std::istringstream lines(text);
    std::string line;
    int lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        const auto begin = line.find_first_not_of(" \t");
        if (begin == std::string::npos) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ContractError(path + ": line " + std::to_string(lineno) +
                                ": expected key=value");
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "k_studies") {
                sc.k_studies = std::stoi(value);
            } else if (key == "beta0") {
                sc.beta0 = std::stod(value);
            } else if (key == "beta1") {
                sc.beta1 = std::stod(value);
            } else if (key == "beta2") {
                sc.beta2 = std::stod(value);
            } else if (key == "gamma1") {
                sc.gamma1 = std::stod(value);
            } else if (key == "target_zero_rate") {
                sc.target_zero_rate = std::stod(value);
            } else if (key == "replications") {
                sc.replications = std::stoi(value);
            } else if (key == "seed") {
                sc.seed = std::stoull(value);
                out.has_seed = true;
            } else if (key == "sample_sizes") {
                sc.sample_sizes.clear();
                for (double v : parse_double_list(value, key)) {
                    sc.sample_sizes.push_back(static_cast<int>(v));
                }
            } else if (key == "treat_probs") {
                sc.treat_probs = parse_double_list(value, key);
            } else if (key == "zero_model") {
                sc.zero_model = parse_zero_model(value);
            } else if (key == "gamma2_factor") {
                sc.gamma2_factor = std::stod(value);
            } else if (key == "workers") {
                sc.workers = std::stoi(value);
            } else {
                throw ContractError(path + ": unknown scenario key '" + key + "'");
            }
        } catch (const ContractError&) {
            throw;
        } catch (const std::exception&) {
            throw ContractError(path + ": line " + std::to_string(lineno) +
                                ": invalid value for '" + key + "'");
        }
    }
    return out;
}

void run_correct(const CorrectConfig& config) {
    if (config.format != "csv" && config.format != "json") {
        throw ContractError("format must be 'csv' or 'json', got '" + config.format + "'");
    }
    const auto dir = ensure_out_dir(config.out_dir);
    const std::vector<StudySummary> studies = read_study_table(config.input);
    if (studies.empty()) {
        throw ContractError(config.input + ": study table has no rows");
    }

    std::vector<std::vector<std::string>> rows;
    std::vector<StudyEffect> corrected_effects;
    ordered_json per_study = ordered_json::array();
    ordered_json skipped = ordered_json::array();
    for (const auto& summary : studies) {
        try {
            const CorrectionResult res = correct_study(summary);
            rows.push_back({summary.study_id,
                            format_double(res.delta1_hat),
                            format_double(res.control.pi_bar),
                            format_double(res.treated.pi_bar),
                            format_double(res.control.mu_bar),
                            format_double(res.treated.mu_bar),
                            format_double(res.beta1_zibc),
                            format_double(res.se1),
                            format_double(res.wald_p),
                            res.control.clamped ? "1" : "0",
                            res.treated.clamped ? "1" : "0"});
            corrected_effects.push_back({summary.study_id, res.beta1_zibc, res.se1, "zibc"});
            ordered_json j;
            j["study_id"] = summary.study_id;
            j["beta1_cv"] = summary.beta1_cv;
            j["delta1_hat"] = res.delta1_hat;
            j["pi_c"] = res.control.pi_bar;
            j["pi_t"] = res.treated.pi_bar;
            j["mu_c"] = res.control.mu_bar;
            j["mu_t"] = res.treated.mu_bar;
            j["beta1_zibc"] = res.beta1_zibc;
            j["idr_zibc"] = std::exp(res.beta1_zibc);
            j["se1"] = res.se1;
            j["wald_p"] = res.wald_p;
            j["clamped_c"] = res.control.clamped;
            j["clamped_t"] = res.treated.clamped;
            per_study.push_back(std::move(j));
        } catch (const DomainError& e) {
            std::cerr << "warning: skipping study '" << summary.study_id
                      << "': " << e.what() << "\n";
            ordered_json j;
            j["study_id"] = summary.study_id;
            j["reason"] = e.what();
            skipped.push_back(std::move(j));
        }
    }

    write_csv(dir / "corrections.csv",
              {"study_id", "delta1_hat", "pi_c", "pi_t", "mu_c", "mu_t",
               "beta1_zibc", "se1", "wald_p", "clamped_c", "clamped_t"},
              rows);

    ordered_json report;
    report["input"] = config.input;
    report["studies"] = per_study;
    report["skipped"] = skipped;
    if (config.pool) {
        if (corrected_effects.empty()) {
            throw NumericalError("no studies left to pool after skipping degenerate rows");
        }
        const MetaResult meta = pool_random_effects(corrected_effects);
        report["pooled"] = meta_to_json(meta);
        write_json_file(dir / "meta.json", meta_to_json(meta));
        std::cout << "pooled corrected effect " << meta.pooled_effect << " (se "
                  << meta.pooled_se << ", tau2 " << meta.tau2 << ") over " << meta.k
                  << " studies\n";
    }
    if (config.format == "json") {
        write_json_file(dir / "corrections.json", report);
    }
    std::cout << "corrected " << rows.size() << " studies (" << skipped.size()
              << " skipped) -> " << (dir / "corrections.csv").string() << "\n";
}

void run_fit(const FitConfig& config) {
    if (config.model != "poisson" && config.model != "zip") {
        throw ContractError("model must be 'poisson' or 'zip', got '" + config.model + "'");
    }
    const auto dir = ensure_out_dir(config.out_dir);
    IpdData data = read_ipd(config.input, config.covariates);

    // the correction assumes covariates centered at the grand mean
    std::vector<double> offsets;
    for (Eigen::Index j = 0; j < data.covariates.cols(); ++j) {
        const double mean = data.covariates.col(j).mean();
        data.covariates.col(j).array() -= mean;
        offsets.push_back(mean);
    }

    bool treat_constant = true;
    for (Eigen::Index i = 1; i < data.treat.size(); ++i) {
        if (data.treat[i] != data.treat[0]) {
            treat_constant = false;
            break;
        }
    }
    DesignMatrix X;
    if (treat_constant) {
        // single-arm data: an intercept + treat design would be singular
        std::cerr << "warning: treat column is constant; fitting without it\n";
        X.values.resize(data.y.size(), 1 + data.covariates.cols());
        X.values.col(0).setOnes();
        X.labels = {"intercept"};
        for (Eigen::Index j = 0; j < data.covariates.cols(); ++j) {
            X.values.col(1 + j) = data.covariates.col(j);
            X.labels.push_back(data.covariate_names[static_cast<std::size_t>(j)]);
        }
        X.validate();
    } else {
        X = DesignMatrix::trial(data.treat, data.covariates, data.covariate_names);
    }

    ordered_json report;
    report["input"] = config.input;
    report["model"] = config.model;
    ordered_json centering = ordered_json::array();
    for (std::size_t j = 0; j < offsets.size(); ++j) {
        ordered_json c;
        c["covariate"] = data.covariate_names[j];
        c["offset"] = offsets[j];
        centering.push_back(std::move(c));
    }
    report["centering_offsets"] = centering;

    if (config.model == "poisson") {
        const FitResult fit = fit_poisson(X, data.y);
        const Eigen::VectorXd se = standard_errors(fit);
        ordered_json coef = ordered_json::array();
        for (Eigen::Index j = 0; j < fit.beta.values.size(); ++j) {
            ordered_json c;
            c["name"] = fit.beta.labels[static_cast<std::size_t>(j)];
            c["estimate"] = fit.beta.values[j];
            c["se"] = se[j];
            coef.push_back(std::move(c));
            std::cout << fit.beta.labels[static_cast<std::size_t>(j)] << "  "
                      << fit.beta.values[j] << "  (se " << se[j] << ")\n";
        }
        report["coefficients"] = coef;
        report["log_likelihood"] = fit.log_likelihood;
        report["iterations"] = fit.iterations;
        report["converged"] = fit.converged;
    } else {
        const ZipFitResult fit = fit_zip(X, data.y, parse_zero_model(config.zero_model));
        const Eigen::Index p = fit.count_beta.values.size();
        ordered_json count = ordered_json::array();
        for (Eigen::Index j = 0; j < p; ++j) {
            ordered_json c;
            c["name"] = fit.count_beta.labels[static_cast<std::size_t>(j)];
            c["estimate"] = fit.count_beta.values[j];
            if (fit.covariance_available) {
                c["se"] = std::sqrt(fit.covariance(j, j));
            }
            count.push_back(std::move(c));
            std::cout << "count." << fit.count_beta.labels[static_cast<std::size_t>(j)]
                      << "  " << fit.count_beta.values[j] << "\n";
        }
        ordered_json zero = ordered_json::array();
        for (Eigen::Index j = 0; j < fit.zero_gamma.values.size(); ++j) {
            ordered_json c;
            c["name"] = fit.zero_gamma.labels[static_cast<std::size_t>(j)];
            c["estimate"] = fit.zero_gamma.values[j];
            if (fit.covariance_available) {
                c["se"] = std::sqrt(fit.covariance(p + j, p + j));
            }
            zero.push_back(std::move(c));
            std::cout << "zero." << fit.zero_gamma.labels[static_cast<std::size_t>(j)]
                      << "  " << fit.zero_gamma.values[j] << "\n";
        }
        report["count_coefficients"] = count;
        report["zero_coefficients"] = zero;
        report["log_likelihood"] = fit.log_likelihood;
        report["em_iterations"] = fit.em_iterations;
        report["converged"] = fit.converged;
        report["covariance_available"] = fit.covariance_available;
    }
    write_json_file(dir / "fit.json", report);
    std::cout << "report -> " << (dir / "fit.json").string() << "\n";
}

namespace {

// Panels grouped by method label; canonical order true, conventional, zibc,
// then any other labels in order of first appearance.
std::vector<ForestPanel> panels_by_method(const std::vector<StudyEffect>& effects,
                                          std::vector<std::pair<std::string, MetaResult>>* pooled) {
    std::vector<std::string> order;
    for (const char* want : {"true", "conventional", "zibc"}) {
        for (const auto& e : effects) {
            if (e.method_label == want) {
                order.emplace_back(want);
                break;
            }
        }
    }
    for (const auto& e : effects) {
        if (std::find(order.begin(), order.end(), e.method_label) == order.end()) {
            order.push_back(e.method_label);
        }
    }
    std::vector<ForestPanel> panels;
    for (const auto& label : order) {
        std::vector<StudyEffect> group;
        for (const auto& e : effects) {
            if (e.method_label == label) {
                group.push_back(e);
            }
        }
        const MetaResult meta = pool_random_effects(group);
        ForestPanel panel;
        panel.title = label.empty() ? "effects" : label;
        panel.rows = forest_rows(group, meta);
        panels.push_back(std::move(panel));
        if (pooled != nullptr) {
            pooled->emplace_back(label.empty() ? "effects" : label, meta);
        }
    }
    return panels;
}

} // namespace

void run_meta(const MetaConfig& config) {
    const auto dir = ensure_out_dir(config.out_dir);
    const std::vector<StudyEffect> effects = read_effects_table(config.input);
    if (effects.empty()) {
        throw ContractError(config.input + ": effects table has no rows");
    }
    std::vector<std::pair<std::string, MetaResult>> pooled;
    const std::vector<ForestPanel> panels = panels_by_method(effects, &pooled);

    ordered_json report;
    report["input"] = config.input;
    ordered_json blocks = ordered_json::array();
    for (const auto& [label, meta] : pooled) {
        ordered_json b;
        b["method"] = label;
        b["result"] = meta_to_json(meta);
        blocks.push_back(std::move(b));
        std::cout << label << ": pooled " << meta.pooled_effect << " (se "
                  << meta.pooled_se << ", tau2 " << meta.tau2 << ", k " << meta.k
                  << ")\n";
    }
    report["pooled"] = blocks;
    write_json_file(dir / "meta.json", report);
    write_text_file(dir / "forest.svg", forest_svg(panels));
    write_text_file(dir / "forest.txt", forest_text(panels));
    std::cout << "report -> " << (dir / "meta.json").string() << "\n";
}

void run_simulate(const SimulateConfig& config) {
    ScenarioFile file = parse_scenario_file(config.scenario_file);
    SimScenario scenario = file.scenario;
    if (config.has_seed) {
        scenario.seed = config.seed;
    } else if (!file.has_seed) {
        throw ContractError("simulate requires an explicit --seed (no hidden entropy)");
    }
    if (config.replications > 0) {
        scenario.replications = config.replications;
    }
    if (config.workers > 0) {
        scenario.workers = config.workers;
    }
    if (!config.zero_model.empty()) {
        scenario.zero_model = parse_zero_model(config.zero_model);
    }
    if (config.forest_rep < 0 || config.forest_rep >= scenario.replications) {
        throw ContractError("--forest-rep must name a replication inside the run");
    }
    scenario.validate();
    const auto dir = ensure_out_dir(config.out_dir);

    const SimReport report = run_simulation(scenario);

    ordered_json j;
    ordered_json sc;
    sc["k_studies"] = scenario.k_studies;
    sc["beta0"] = scenario.beta0;
    sc["beta1"] = scenario.beta1;
    sc["beta2"] = scenario.beta2;
    sc["gamma1"] = scenario.gamma1;
    sc["target_zero_rate"] = scenario.target_zero_rate;
    sc["sample_sizes"] = scenario.resolved_sizes();
    sc["treat_probs"] = scenario.resolved_treat_probs();
    sc["replications"] = scenario.replications;
    sc["seed"] = scenario.seed;
    sc["zero_model"] =
        scenario.zero_model == ZeroModel::FullCovariates ? "full" : "intercept";
    sc["gamma2_factor"] = scenario.gamma2_factor;
    j["scenario"] = sc;
    ordered_json cal;
    cal["gamma0"] = report.calibration.gamma0;
    cal["gamma1"] = report.calibration.gamma1;
    cal["gamma2"] = report.calibration.gamma2;
    cal["achieved_zero_rate"] = report.calibration.achieved_zero_rate;
    cal["quadrature_error"] = report.calibration.quadrature_error;
    cal["mean_pi_treated"] = report.calibration.mean_pi_treated;
    cal["mean_pi_control"] = report.calibration.mean_pi_control;
    j["calibration"] = cal;
    const auto method_json = [](const MethodSummary& m) {
        ordered_json b;
        b["coverage"] = m.coverage;
        b["mse"] = m.mse;
        b["avg_pooled_se"] = m.avg_pooled_se;
        b["aprd"] = m.aprd;
        return b;
    };
    j["true"] = method_json(report.true_method);
    j["conventional"] = method_json(report.conventional);
    j["zibc"] = method_json(report.zibc);
    ordered_json avg;
    avg["delta1"] = report.avg_delta1;
    avg["delta1_hat"] = report.avg_delta1_hat;
    avg["pi_t"] = report.avg_pi_t;
    avg["pi_c"] = report.avg_pi_c;
    avg["beta1_cv"] = report.avg_beta1_cv;
    avg["beta1_mle"] = report.avg_beta1_mle;
    avg["beta1_zibc"] = report.avg_beta1_zibc;
    j["averages"] = avg;
    j["replications_used"] = report.replications_used;
    j["flagged_replications"] = report.flagged_replications;
    write_json_file(dir / "report.json", j);

    std::vector<std::vector<std::string>> rows;
    const auto add_method = [&](const std::string& name, const MethodSummary& m) {
        rows.push_back({"coverage", name, format_double(m.coverage)});
        rows.push_back({"mse", name, format_double(m.mse)});
        rows.push_back({"avg_pooled_se", name, format_double(m.avg_pooled_se)});
        rows.push_back({"aprd", name, format_double(m.aprd)});
    };
    add_method("true", report.true_method);
    add_method("conventional", report.conventional);
    add_method("zibc", report.zibc);
    rows.push_back({"avg_delta1", "", format_double(report.avg_delta1)});
    rows.push_back({"avg_delta1_hat", "", format_double(report.avg_delta1_hat)});
    rows.push_back({"avg_pi_t", "", format_double(report.avg_pi_t)});
    rows.push_back({"avg_pi_c", "", format_double(report.avg_pi_c)});
    rows.push_back({"avg_beta1_cv", "", format_double(report.avg_beta1_cv)});
    rows.push_back({"avg_beta1_mle", "", format_double(report.avg_beta1_mle)});
    rows.push_back({"avg_beta1_zibc", "", format_double(report.avg_beta1_zibc)});
    rows.push_back({"replications_used", "",
                    std::to_string(report.replications_used)});
    rows.push_back({"flagged_replications", "",
                    std::to_string(report.flagged_replications.size())});
    write_csv(dir / "report.csv", {"metric", "method", "value"}, rows);

    // forest plot of the designated replication, three method panels
    const ReplicationResult rep =
        run_replication(scenario, report.calibration, config.forest_rep);
    std::vector<StudyEffect> eff_true, eff_cv, eff_zibc;
    for (const auto& s : rep.studies) {
        if (!s.ok) {
            continue;
        }
        eff_true.push_back({s.summary.study_id, s.beta1_mle, s.se1_mle, "true"});
        eff_cv.push_back({s.summary.study_id, s.beta1_cv, s.se1_cv, "conventional"});
        eff_zibc.push_back(
            {s.summary.study_id, s.correction.beta1_zibc, s.correction.se1, "zibc"});
    }
    if (!eff_true.empty()) {
        std::vector<ForestPanel> panels;
        const auto add_panel = [&](const std::string& title,
                                   const std::vector<StudyEffect>& effs) {
            const MetaResult meta = pool_random_effects(effs);
            panels.push_back({title, forest_rows(effs, meta)});
        };
        add_panel("true", eff_true);
        add_panel("conventional", eff_cv);
        add_panel("zibc", eff_zibc);
        write_text_file(dir / "forest.svg", forest_svg(panels));
        write_text_file(dir / "forest.txt", forest_text(panels));
    }

    std::cout << "coverage true/cv/zibc: " << report.true_method.coverage << " / "
              << report.conventional.coverage << " / " << report.zibc.coverage
              << "\nreport -> " << (dir / "report.json").string() << "\n";
}

} // namespace zibc
