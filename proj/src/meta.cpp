#include "zibc/meta.hpp"

#include <cmath>

#include "zibc/errors.hpp"

namespace zibc {

namespace {
constexpr double kZ95 = 1.96;
}

MetaResult pool_random_effects(const std::vector<StudyEffect>& effects) {
    const int k = static_cast<int>(effects.size());
    if (k == 0) {
        throw ContractError("meta-analysis requires at least one study");
    }
    for (const auto& e : effects) {
        if (!std::isfinite(e.effect)) {
            throw ContractError("study '" + e.study_id + "': effect is not finite");
        }
        if (!(e.se > 0.0) || !std::isfinite(e.se)) {
            throw ContractError("study '" + e.study_id + "': se must be positive");
        }
    }

    MetaResult out;
    out.k = k;

    // fixed-effect pass: inverse-variance weights and Cochran's Q
    double sw = 0.0, swe = 0.0, sw2 = 0.0;
    for (const auto& e : effects) {
        const double w = 1.0 / (e.se * e.se);
        sw += w;
        swe += w * e.effect;
        sw2 += w * w;
    }
    const double fe = swe / sw;
    double q = 0.0;
    for (const auto& e : effects) {
        const double w = 1.0 / (e.se * e.se);
        q += w * (e.effect - fe) * (e.effect - fe);
    }
    out.q_statistic = q;

    double tau2 = 0.0;
    if (k > 1) {
        const double denom = sw - sw2 / sw;
        if (denom > 0.0) {
            tau2 = std::max(0.0, (q - (k - 1)) / denom);
        }
    }
    out.tau2 = tau2;

    double swr = 0.0, swre = 0.0;
    out.weights.resize(effects.size());
    for (std::size_t i = 0; i < effects.size(); ++i) {
        const double w = 1.0 / (effects[i].se * effects[i].se + tau2);
        out.weights[i] = w;
        swr += w;
        swre += w * effects[i].effect;
    }
    for (auto& w : out.weights) {
        w /= swr;
    }
    out.pooled_effect = swre / swr;
    out.pooled_se = 1.0 / std::sqrt(swr);
    out.ci_low = out.pooled_effect - kZ95 * out.pooled_se;
    out.ci_high = out.pooled_effect + kZ95 * out.pooled_se;
    return out;
}

std::vector<ForestRow> forest_rows(const std::vector<StudyEffect>& effects,
                                   const MetaResult& meta) {
    if (static_cast<int>(effects.size()) != meta.k) {
        throw ContractError("effect count does not match pooled result");
    }
    std::vector<ForestRow> rows;
    rows.reserve(effects.size() + 1);
    for (std::size_t i = 0; i < effects.size(); ++i) {
        const auto& e = effects[i];
        rows.push_back({e.study_id, e.effect, e.effect - kZ95 * e.se,
                        e.effect + kZ95 * e.se, meta.weights[i], false});
    }
    rows.push_back({"RE Model", meta.pooled_effect, meta.ci_low, meta.ci_high,
                    1.0, true});
    return rows;
}

} // namespace zibc
