#ifndef ZIBC_META_HPP
#define ZIBC_META_HPP

#include <string>
#include <vector>

namespace zibc {

/// One study's effect on the log incidence-density-ratio scale.
struct StudyEffect {
    std::string study_id;
    double effect = 0.0;
    double se = 0.0;
    std::string method_label; // "true", "conventional", or "zibc"
};

struct MetaResult {
    double pooled_effect = 0.0;
    double pooled_se = 0.0;
    double tau2 = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double q_statistic = 0.0;
    std::vector<double> weights; // normalized random-effects weights
    int k = 0;
};

/// DerSimonian-Laird random-effects pooling with a plain normal 95% CI.
MetaResult pool_random_effects(const std::vector<StudyEffect>& effects);

struct ForestRow {
    std::string label;
    double effect = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double weight = 0.0; // normalized; summary row carries 1
    bool is_summary = false;
};

/// Per-study rows (effect +/- 1.96 se) plus the pooled summary row.
std::vector<ForestRow> forest_rows(const std::vector<StudyEffect>& effects,
                                   const MetaResult& meta);

} // namespace zibc

#endif
