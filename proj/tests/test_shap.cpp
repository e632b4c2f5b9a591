#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "mobaudit/errors.hpp"
#include "mobaudit/model.hpp"
#include "mobaudit/rng.hpp"
#include "mobaudit/shap.hpp"

using namespace mobaudit;
using model::ForestModel;
using model::Tree;
using model::TreeNode;

namespace {

TreeNode leaf(double value, double cover) {
    TreeNode n;
    n.feature = -1;
    n.value = value;
    n.cover = cover;
    return n;
}

TreeNode split(int feature, double threshold, int left, int right, double cover) {
    TreeNode n;
    n.feature = feature;
    n.threshold = threshold;
    n.left = left;
    n.right = right;
    n.cover = cover;
    return n;
}

// Conditional expectation of the tree when only the features in mask are
// known; unknown splits fall through both children weighted by cover.
double cond_exp(const Tree& t, int node, const std::vector<double>& x, uint32_t mask) {
    const TreeNode& n = t.nodes[size_t(node)];
    if (n.feature < 0) return n.value;
    if (mask >> n.feature & 1u)
        return cond_exp(t, x[size_t(n.feature)] <= n.threshold ? n.left : n.right, x, mask);
    double cl = t.nodes[size_t(n.left)].cover;
    double cr = t.nodes[size_t(n.right)].cover;
    return (cl * cond_exp(t, n.left, x, mask) + cr * cond_exp(t, n.right, x, mask)) /
           (cl + cr);
}

// Exact Shapley values by enumerating every feature subset.
std::vector<double> shapley_enumerated(const Tree& t, size_t d, const std::vector<double>& x) {
    std::vector<double> fact(d + 1, 1.0);
    for (size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * double(i);
    std::vector<double> phi(d, 0.0);
    for (uint32_t mask = 0; mask < (1u << d); ++mask) {
        size_t s = size_t(__builtin_popcount(mask));
        double v_s = cond_exp(t, 0, x, mask);
        double weight = fact[s] * fact[d - s - 1] / fact[d];
        for (size_t i = 0; i < d; ++i) {
            if (mask >> i & 1u) continue;
            phi[i] += weight * (cond_exp(t, 0, x, mask | (1u << i)) - v_s);
        }
    }
    return phi;
}

// Random tree with consistent covers: leaves get random positive covers and
// internal nodes sum their children.
Tree random_tree(Rng& rng, int max_depth, size_t n_features) {
    Tree t;
    // Build recursively; returns node index.
    auto build = [&](auto&& self, int depth) -> int {
        bool make_leaf = depth >= max_depth || rng.uniform01() < 0.25;
        if (make_leaf) {
            t.nodes.push_back(leaf(rng.uniform(-50, 50), 1 + double(rng.uniform_index(20))));
            return int(t.nodes.size()) - 1;
        }
        int idx = int(t.nodes.size());
        t.nodes.push_back(split(int(rng.uniform_index(n_features)), rng.uniform(0, 1), -1,
                                -1, 0));
        int l = self(self, depth + 1);
        int r = self(self, depth + 1);
        t.nodes[size_t(idx)].left = l;
        t.nodes[size_t(idx)].right = r;
        t.nodes[size_t(idx)].cover =
            t.nodes[size_t(l)].cover + t.nodes[size_t(r)].cover;
        return idx;
    };
    build(build, 0);
    return t;
}

ForestModel wrap(Tree t, size_t n_features) {
    ForestModel f;
    f.trees.push_back(std::move(t));
    f.n_features = n_features;
    return f;
}

} // namespace

TEST_CASE("tree_shap: single leaf contributes nothing beyond the base") {
    auto f = wrap(Tree{{leaf(42.0, 10)}}, 3);
    auto attr = shap::tree_shap(f, {0.1, 0.2, 0.3});
    CHECK(attr.base == 42.0);
    for (double p : attr.phi) CHECK(p == 0.0);
}

TEST_CASE("tree_shap: depth-one tree matches the closed form") {
    // Split on feature 1 at 0.5; left leaf a with cover 30, right leaf b with
    // cover 10, so p = 0.75.
    Tree t{{split(1, 0.5, 1, 2, 40), leaf(20.0, 30), leaf(100.0, 10)}};
    auto f = wrap(t, 4);
    double p = 0.75, a = 20.0, b = 100.0;
    double base = p * a + (1 - p) * b;

    auto down = shap::tree_shap(f, {0.9, 0.2, 0.9, 0.9}); // goes left
    CHECK(down.base == doctest::Approx(base).epsilon(1e-12));
    CHECK(down.phi[1] == doctest::Approx(a - base).epsilon(1e-12));
    CHECK(down.phi[0] == 0.0);
    CHECK(down.phi[2] == 0.0);
    CHECK(down.phi[3] == 0.0);

    auto up = shap::tree_shap(f, {0.9, 0.8, 0.9, 0.9}); // goes right
    CHECK(up.phi[1] == doctest::Approx(b - base).epsilon(1e-12));
}

TEST_CASE("tree_shap: agrees with subset enumeration on random trees") {
    Rng rng(derive_seed(44, "shap-oracle", 0));
    for (int trial = 0; trial < 100; ++trial) {
        size_t d = 2 + rng.uniform_index(11); // 2..12 features
        auto t = random_tree(rng, 3, d);
        auto f = wrap(t, d);
        for (int q = 0; q < 3; ++q) {
            std::vector<double> x;
            for (size_t i = 0; i < d; ++i) x.push_back(rng.uniform01());
            auto attr = shap::tree_shap(f, x);
            auto oracle = shapley_enumerated(f.trees[0], d, x);
            for (size_t i = 0; i < d; ++i)
                CHECK(std::abs(attr.phi[i] - oracle[i]) <= 1e-6);
            // Local accuracy: base plus attributions recovers the prediction.
            double total = attr.base;
            for (double p : attr.phi) total += p;
            CHECK(std::abs(total - f.predict(x)) <= 1e-6);
            // Base value equals the cover-weighted tree expectation (v of the
            // empty set).
            CHECK(attr.base == doctest::Approx(cond_exp(f.trees[0], 0, x, 0)).epsilon(1e-9));
        }
    }
}

TEST_CASE("tree_shap: features absent from the tree get exactly zero") {
    Rng rng(derive_seed(44, "null-player", 0));
    for (int trial = 0; trial < 20; ++trial) {
        size_t d = 6;
        auto t = random_tree(rng, 3, 3); // splits only touch features 0..2
        auto f = wrap(t, d);
        std::vector<double> x;
        for (size_t i = 0; i < d; ++i) x.push_back(rng.uniform01());
        auto attr = shap::tree_shap(f, x);
        for (size_t i = 3; i < d; ++i) CHECK(attr.phi[i] == 0.0);
    }
}

TEST_CASE("tree_shap: interchangeable features in an AND tree share credit") {
    // y = [x0 <= 0.5 AND x1 <= 0.5] with covers arranged so the game treats
    // the two features identically: v(S+{0}) == v(S+{1}) for every S.
    Tree t{{
        split(0, 0.5, 1, 4, 40),
        split(1, 0.5, 2, 3, 20),
        leaf(1.0, 10),
        leaf(0.0, 10),
        leaf(0.0, 20),
    }};
    std::vector<double> x{0.2, 0.2};
    auto oracle = shapley_enumerated(t, 2, x);
    auto attr = shap::tree_shap(wrap(t, 2), x);
    CHECK(oracle[0] == doctest::Approx(oracle[1]).epsilon(1e-12));
    CHECK(oracle[0] == doctest::Approx(0.375).epsilon(1e-12)); // (1 - 1/4) / 2
    for (size_t i = 0; i < 2; ++i)
        CHECK(attr.phi[i] == doctest::Approx(oracle[i]).epsilon(1e-9));
}

TEST_CASE("tree_shap: repeated feature along one path still satisfies the oracle") {
    // Feature 0 is tested twice on the same root-to-leaf path, which
    // exercises the path-unwinding branch.
    Tree t{{
        split(0, 0.7, 1, 2, 100),
        split(0, 0.3, 3, 4, 80),
        leaf(50.0, 20),
        split(1, 0.5, 5, 6, 48),
        leaf(-10.0, 32),
        leaf(4.0, 24),
        leaf(12.0, 24),
    }};
    Rng rng(derive_seed(44, "revisit", 0));
    for (int q = 0; q < 30; ++q) {
        std::vector<double> x{rng.uniform01(), rng.uniform01()};
        auto attr = shap::tree_shap(wrap(t, 2), x);
        auto oracle = shapley_enumerated(t, 2, x);
        for (size_t i = 0; i < 2; ++i)
            CHECK(attr.phi[i] == doctest::Approx(oracle[i]).epsilon(1e-9));
        double total = attr.base;
        for (double p : attr.phi) total += p;
        CHECK(std::abs(total - t.predict(x)) <= 1e-9);
    }
}

TEST_CASE("tree_shap: forest attribution is the mean of per-tree attributions") {
    Rng rng(derive_seed(44, "forest-linearity", 0));
    ForestModel f;
    f.n_features = 5;
    for (int t = 0; t < 6; ++t) f.trees.push_back(random_tree(rng, 3, 5));
    std::vector<double> x{0.1, 0.9, 0.4, 0.6, 0.2};
    auto whole = shap::tree_shap(f, x);
    std::vector<double> mean_phi(5, 0.0);
    double mean_base = 0;
    for (const auto& t : f.trees) {
        auto one = shap::tree_shap(wrap(t, 5), x);
        mean_base += one.base;
        for (size_t i = 0; i < 5; ++i) mean_phi[i] += one.phi[i];
    }
    mean_base /= 6.0;
    for (auto& p : mean_phi) p /= 6.0;
    CHECK(whole.base == doctest::Approx(mean_base).epsilon(1e-12));
    for (size_t i = 0; i < 5; ++i)
        CHECK(whole.phi[i] == doctest::Approx(mean_phi[i]).epsilon(1e-12));
}

TEST_CASE("tree_shap: fitted forests satisfy local accuracy on every sample") {
    Rng rng(derive_seed(44, "fitted-accuracy", 0));
    std::vector<model::TractSample> s;
    for (int i = 0; i < 90; ++i) {
        model::TractSample smp;
        smp.city_id = "a";
        smp.tract_geoid = "t" + std::to_string(i);
        smp.features = {rng.uniform01(), rng.uniform01(), rng.uniform01(), rng.uniform01()};
        smp.target = 60 * smp.features[0] - 25 * smp.features[2] + rng.normal(0, 3);
        s.push_back(smp);
    }
    model::Hyperparams hp;
    hp.n_trees = 20;
    hp.max_depth = 8;
    hp.min_leaf = 2;
    auto forest = model::fit_forest(s, hp, 71);
    for (const auto& smp : s) {
        auto attr = shap::tree_shap(forest, smp.features);
        double total = attr.base;
        for (double p : attr.phi) total += p;
        CHECK(std::abs(total - forest.predict(smp.features)) <= 1e-6);
    }
}

TEST_CASE("tree_shap: rejects inputs with the wrong feature count") {
    auto f = wrap(Tree{{leaf(1.0, 1)}}, 3);
    CHECK_THROWS_AS(shap::tree_shap(f, {0.1, 0.2}), DataError);
}

TEST_CASE("rescale_percent: fraction of the city median") {
    shap::Attribution a{{0.0, 80.0, -8.0}, 50.0};
    auto pct = shap::rescale_percent(a, 80.0);
    REQUIRE(pct.size() == 3);
    CHECK(pct[0] == 0.0);
    CHECK(pct[1] == doctest::Approx(100.0));
    CHECK(pct[2] == doctest::Approx(-10.0));
    CHECK_THROWS_AS(shap::rescale_percent(a, 0.0), UndefinedStatistic);
    CHECK_THROWS_AS(shap::rescale_percent(a, -2.0), UndefinedStatistic);
}

TEST_CASE("feature_importance: mean absolute attribution, stable ordering") {
    std::vector<shap::Attribution> rows;
    // Three tracts, three features; feature "b" never moves, feature "c"
    // dominates, feature "a" is middling with sign flips.
    rows.push_back({{1.0, 0.0, -9.0}, 50});
    rows.push_back({{-2.0, 0.0, 7.0}, 50});
    rows.push_back({{1.5, 0.0, 8.0}, 50});
    auto ranked = shap::feature_importance(rows, {"a", "b", "c"});
    REQUIRE(ranked.size() == 3);
    CHECK(ranked[0].feature == "c");
    CHECK(ranked[0].mean_abs_phi == doctest::Approx(8.0));
    CHECK(ranked[1].feature == "a");
    CHECK(ranked[1].mean_abs_phi == doctest::Approx(1.5));
    CHECK(ranked[2].feature == "b");
    CHECK(ranked[2].mean_abs_phi == 0.0);

    // Row order doesn't matter.
    std::swap(rows[0], rows[2]);
    auto again = shap::feature_importance(rows, {"a", "b", "c"});
    for (size_t i = 0; i < 3; ++i) {
        CHECK(again[i].feature == ranked[i].feature);
        CHECK(again[i].mean_abs_phi == doctest::Approx(ranked[i].mean_abs_phi));
    }

    // Equal importances fall back to name order.
    std::vector<shap::Attribution> tied;
    tied.push_back({{3.0, 3.0}, 10});
    auto by_name = shap::feature_importance(tied, {"zeta", "alpha"});
    CHECK(by_name[0].feature == "alpha");
    CHECK(by_name[1].feature == "zeta");

    CHECK_THROWS_AS(shap::feature_importance({}, {"a"}), DataError);
}
