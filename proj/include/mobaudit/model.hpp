#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mobaudit/census.hpp"
#include "mobaudit/ingest.hpp"

namespace mobaudit::model {

struct TractSample {
    std::string tract_geoid;
    std::string city_id;
    std::vector<double> features;
    double target = 0; // median per-user ping count of users homed here
};

struct Hyperparams {
    int n_trees = 100;
    int max_depth = -1;      // -1 = unlimited
    int min_leaf = 2;
    int feature_subset = -1; // features considered per node; -1 = all
    bool bootstrap = true;

    bool operator==(const Hyperparams&) const = default;
};

// Binary regression tree; nodes[0] is the root. Internal nodes route
// x[feature] <= threshold to the left child. Leaves have feature == -1.
struct TreeNode {
    int feature = -1;
    double threshold = 0;
    int left = -1;
    int right = -1;
    double value = 0; // mean training target at this node
    double cover = 0; // training samples reaching this node
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict(const std::vector<double>& x) const;
};

struct ForestModel {
    std::vector<Tree> trees;
    Hyperparams hp;
    uint64_t seed = 0;
    size_t n_features = 0;
    double predict(const std::vector<double>& x) const; // mean over trees
};

// Median with the even rule: mean of the two middle values.
double median(std::vector<double> v);

struct MedianTally {
    uint64_t too_few_users = 0;
    uint64_t tract_not_modeled = 0; // home tract lacks a complete feature row
};

// One sample per tract with at least min_users retained users homed there;
// target = median of their ping counts, features from the tract record.
std::vector<TractSample> median_production(
    const std::vector<ingest::UserProfile>& profiles,
    const std::map<std::string, census::TractRecord>& tracts,
    const std::vector<std::string>& feature_spec, const std::string& city_id,
    size_t min_users = 5, MedianTally* tally = nullptr);

Tree fit_tree(const std::vector<TractSample>& samples, const Hyperparams& hp, uint64_t seed);
ForestModel fit_forest(const std::vector<TractSample>& samples, const Hyperparams& hp,
                       uint64_t seed);

// Squared Pearson correlation between predictions and observations — the
// OLS R^2 after the best linear transformation of the outputs. Degenerate
// variance on either side scores 0.
double score_r2_linear(const std::vector<double>& predicted,
                       const std::vector<double>& observed);

struct FoldResult {
    double r2 = 0;
    Hyperparams chosen;
};

struct CVReport {
    std::vector<FoldResult> outer;
    std::vector<int> outer_fold; // fold id per sample index
    double mean_r2 = 0;
    double std_r2 = 0;
    Hyperparams final_hp;
};

// Captures the index sets each fold actually used; lets callers assert the
// no-leakage properties from outside.
struct FoldAudit {
    std::vector<std::vector<size_t>> outer_test;              // per outer fold
    std::vector<std::vector<std::vector<size_t>>> inner_valid; // per outer fold, per inner fold
};

struct CVResult {
    CVReport report;
    ForestModel final_model;
};

// Nested cross-validation: the inner grid search sees only outer-train data;
// each outer fold is scored with the hyperparameters its own inner folds
// chose; the final model is refit on everything with the modal choice (ties
// to the simplest). Fold assignment is a seeded shuffle stratified by city.
CVResult nested_cv(const std::vector<TractSample>& samples,
                   const std::vector<Hyperparams>& grid, int k_outer, int k_inner,
                   uint64_t seed, FoldAudit* audit = nullptr);

std::vector<Hyperparams> default_grid(size_t n_features);

// Stratified fold assignment (exposed for property tests): samples of each
// city are shuffled with a city-specific stream and dealt round-robin.
std::vector<int> assign_folds(const std::vector<TractSample>& samples, int k, uint64_t seed,
                              const char* label);

struct CityMatrix {
    std::vector<std::string> cities;              // sorted
    std::vector<std::vector<double>> score;       // [train_city][test_city]
    std::map<std::string, CVReport> diagonal_cv;  // per-city CV detail
};

// Off-diagonal (A,B): A's final model scored on B's samples. Diagonal: A's
// mean outer-CV score. When `finals` is given it receives each city's final
// refit model, keyed by city.
CityMatrix city_matrix(const std::map<std::string, std::vector<TractSample>>& by_city,
                       const std::vector<Hyperparams>& grid, int k_outer, int k_inner,
                       uint64_t seed, std::map<std::string, ForestModel>* finals = nullptr);

struct LooEntry {
    std::string city;
    double train_score = 0; // mean outer-CV score of the pooled model
    double test_score = 0;  // pooled final model scored on the held-out city
};

std::vector<LooEntry> leave_one_out(const std::map<std::string, std::vector<TractSample>>& by_city,
                                    const std::vector<Hyperparams>& grid, int k_outer,
                                    int k_inner, uint64_t seed);

void write_model_json(const std::string& path, const ForestModel& m,
                      const std::vector<std::string>& feature_names);
ForestModel read_model_json(const std::string& path,
                            std::vector<std::string>* feature_names = nullptr);

} // namespace mobaudit::model
