#pragma once

#include <string>
#include <vector>

#include "mobaudit/model.hpp"

namespace mobaudit::shap {

struct Attribution {
    std::vector<double> phi; // one additive contribution per feature
    double base = 0;         // cover-weighted expectation, averaged over trees
};

// Exact path-dependent TreeSHAP: Shapley values of the cover-weighted
// conditional-expectation game, polynomial in tree size. Forest values are
// the mean over trees. base + sum(phi) equals the model prediction.
Attribution tree_shap(const model::ForestModel& m, const std::vector<double>& x);

// Same attribution for a single tree (exposed for the enumeration oracle).
Attribution tree_shap_single(const model::Tree& t, size_t n_features,
                             const std::vector<double>& x);

// Percent-of-median-tract units: 100 * phi / city_median_target.
std::vector<double> rescale_percent(const Attribution& a, double city_median_target);

struct ImportanceEntry {
    std::string feature;
    double mean_abs_phi = 0;
};

// Mean |phi| per feature over samples, descending; ties by feature name.
std::vector<ImportanceEntry> feature_importance(const std::vector<Attribution>& atts,
                                                const std::vector<std::string>& names);

// Per-sample long-format CSV: tract_geoid, feature, phi, percent.
void write_attributions_csv(const std::string& path,
                            const std::vector<std::string>& tract_geoids,
                            const std::vector<Attribution>& atts,
                            const std::vector<std::string>& feature_names,
                            double city_median_target);

} // namespace mobaudit::shap
