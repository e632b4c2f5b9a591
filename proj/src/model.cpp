#include "mobaudit/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "mobaudit/errors.hpp"
#include "mobaudit/rng.hpp"

namespace mobaudit::model {

double Tree::predict(const std::vector<double>& x) const {
    int j = 0;
    while (nodes[j].feature >= 0) {
        const auto& n = nodes[j];
        if (static_cast<size_t>(n.feature) >= x.size())
            throw DataError("feature vector shorter than the model expects");
        j = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[j].value;
}

double ForestModel::predict(const std::vector<double>& x) const {
    if (trees.empty()) throw DataError("prediction from an empty forest");
    double sum = 0;
    for (const auto& t : trees) sum += t.predict(x);
    return sum / static_cast<double>(trees.size());
}

double median(std::vector<double> v) {
    if (v.empty()) throw UndefinedStatistic("median of empty set");
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

std::vector<TractSample> median_production(
    const std::vector<ingest::UserProfile>& profiles,
    const std::map<std::string, census::TractRecord>& tracts,
    const std::vector<std::string>& feature_spec, const std::string& city_id,
    size_t min_users, MedianTally* tally) {
    std::map<std::string, std::vector<double>> counts_by_tract;
    for (const auto& p : profiles)
        if (!p.home_tract.empty())
            counts_by_tract[p.home_tract].push_back(static_cast<double>(p.ping_count));

    std::vector<TractSample> samples;
    for (const auto& [tract, counts] : counts_by_tract) {
        if (counts.size() < min_users) {
            if (tally) ++tally->too_few_users;
            continue;
        }
        auto it = tracts.find(tract);
        if (it == tracts.end()) {
            if (tally) ++tally->tract_not_modeled;
            continue;
        }
        TractSample s;
        s.tract_geoid = tract;
        s.city_id = city_id;
        s.features = census::feature_vector(it->second, feature_spec);
        s.target = median(counts);
        samples.push_back(std::move(s));
    }
    return samples; // map iteration: already sorted by tract GEOID
}

namespace {

struct Builder {
    const std::vector<TractSample>& samples;
    const Hyperparams& hp;
    Rng rng;
    int n_features;
    std::vector<TreeNode> nodes;

    // Scratch buffers for the split scan.
    std::vector<size_t> sorted_idx;

    Builder(const std::vector<TractSample>& s, const Hyperparams& h, uint64_t seed)
        : samples(s), hp(h), rng(seed),
          n_features(static_cast<int>(s.front().features.size())) {}

    double target(size_t i) const { return samples[i].target; }
    double feat(size_t i, int f) const { return samples[i].features[f]; }

    // Fisher-Yates prefix to pick k distinct features; full set short-circuits
    // so the RNG stream is untouched when no subsetting happens.
    std::vector<int> feature_candidates() {
        int k = hp.feature_subset <= 0 ? n_features
                                       : std::min(hp.feature_subset, n_features);
        std::vector<int> all(n_features);
        std::iota(all.begin(), all.end(), 0);
        if (k >= n_features) return all;
        for (int i = 0; i < k; ++i) {
            size_t j = i + rng.uniform_index(static_cast<uint64_t>(n_features - i));
            std::swap(all[i], all[j]);
        }
        all.resize(k);
        std::sort(all.begin(), all.end()); // scan order independent of draw order
        return all;
    }

    int build(std::vector<size_t>& idx, int depth) {
        double sum = 0, sum2 = 0;
        for (size_t i : idx) {
            sum += target(i);
            sum2 += target(i) * target(i);
        }
        double n = static_cast<double>(idx.size());
        double mean = sum / n;
        double sse = std::max(0.0, sum2 - sum * sum / n);

        int node_id = static_cast<int>(nodes.size());
        nodes.push_back(TreeNode{-1, 0, -1, -1, mean, n});

        bool depth_stop = hp.max_depth >= 0 && depth >= hp.max_depth;
        size_t min_leaf = static_cast<size_t>(std::max(1, hp.min_leaf));
        if (depth_stop || idx.size() < 2 * min_leaf || sse <= 1e-12) return node_id;

        // Greedy variance-reduction split over the feature candidates.
        int best_f = -1;
        double best_cost = sse;
        double best_thr = 0;
        bool found = false;
        for (int f : feature_candidates()) {
            sorted_idx = idx;
            std::sort(sorted_idx.begin(), sorted_idx.end(), [&](size_t a, size_t b) {
                if (feat(a, f) != feat(b, f)) return feat(a, f) < feat(b, f);
                return a < b;
            });
            double lsum = 0, lsum2 = 0;
            for (size_t k = 0; k + 1 < sorted_idx.size(); ++k) {
                double y = target(sorted_idx[k]);
                lsum += y;
                lsum2 += y * y;
                size_t nl = k + 1, nr = sorted_idx.size() - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                double xl = feat(sorted_idx[k], f), xr = feat(sorted_idx[k + 1], f);
                if (xl == xr) continue; // no threshold separates equal values
                double rsum = sum - lsum, rsum2 = sum2 - lsum2;
                double cost = (lsum2 - lsum * lsum / double(nl)) +
                              (rsum2 - rsum * rsum / double(nr));
                if (!found || cost < best_cost - 1e-12) {
                    found = true;
                    best_cost = cost;
                    best_f = f;
                    best_thr = (xl + xr) / 2.0;
                }
            }
        }
        if (!found) return node_id;

        std::vector<size_t> left, right;
        left.reserve(idx.size());
        right.reserve(idx.size());
        for (size_t i : idx)
            (feat(i, best_f) <= best_thr ? left : right).push_back(i);

        nodes[node_id].feature = best_f;
        nodes[node_id].threshold = best_thr;
        int l = build(left, depth + 1);
        nodes[node_id].left = l;
        int r = build(right, depth + 1);
        nodes[node_id].right = r;
        return node_id;
    }
};

} // namespace

Tree fit_tree(const std::vector<TractSample>& samples, const Hyperparams& hp, uint64_t seed) {
    if (samples.empty()) throw DataError("cannot fit a tree on zero samples");
    Builder b(samples, hp, seed);
    std::vector<size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    b.build(idx, 0);
    Tree t;
    t.nodes = std::move(b.nodes);
    return t;
}

ForestModel fit_forest(const std::vector<TractSample>& samples, const Hyperparams& hp,
                       uint64_t seed) {
    if (samples.empty()) throw DataError("cannot fit a forest on zero samples");
    ForestModel m;
    m.hp = hp;
    m.seed = seed;
    m.n_features = samples.front().features.size();
    m.trees.reserve(static_cast<size_t>(std::max(1, hp.n_trees)));
    for (int t = 0; t < std::max(1, hp.n_trees); ++t) {
        uint64_t tree_seed = derive_seed(seed, "tree", static_cast<uint64_t>(t));
        if (hp.bootstrap) {
            Rng boot(derive_seed(seed, "bootstrap", static_cast<uint64_t>(t)));
            std::vector<TractSample> resampled;
            resampled.reserve(samples.size());
            for (size_t i = 0; i < samples.size(); ++i)
                resampled.push_back(samples[boot.uniform_index(samples.size())]);
            m.trees.push_back(fit_tree(resampled, hp, tree_seed));
        } else {
            m.trees.push_back(fit_tree(samples, hp, tree_seed));
        }
    }
    return m;
}

double score_r2_linear(const std::vector<double>& predicted,
                       const std::vector<double>& observed) {
    if (predicted.size() != observed.size() || predicted.empty())
        throw DataError("score needs equal-length non-empty vectors");
    double n = static_cast<double>(predicted.size());
    double mp = 0, mo = 0;
    for (size_t i = 0; i < predicted.size(); ++i) {
        mp += predicted[i];
        mo += observed[i];
    }
    mp /= n;
    mo /= n;
    double spo = 0, spp = 0, soo = 0;
    for (size_t i = 0; i < predicted.size(); ++i) {
        double dp = predicted[i] - mp, dobs = observed[i] - mo;
        spo += dp * dobs;
        spp += dp * dp;
        soo += dobs * dobs;
    }
    if (spp <= 0 || soo <= 0) return 0.0;
    double r = spo / std::sqrt(spp * soo);
    return r * r;
}

std::vector<int> assign_folds(const std::vector<TractSample>& samples, int k, uint64_t seed,
                              const char* label) {
    std::map<std::string, std::vector<size_t>> by_city;
    for (size_t i = 0; i < samples.size(); ++i) by_city[samples[i].city_id].push_back(i);

    std::vector<int> fold(samples.size(), -1);
    uint64_t city_idx = 0;
    for (auto& [city, idx] : by_city) {
        Rng rng(derive_seed(seed, label, city_idx++));
        for (size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
        for (size_t pos = 0; pos < idx.size(); ++pos)
            fold[idx[pos]] = static_cast<int>(pos % static_cast<size_t>(k));
    }
    return fold;
}

std::vector<Hyperparams> default_grid(size_t n_features) {
    int third = static_cast<int>((n_features + 2) / 3); // ceil(d/3)
    std::vector<Hyperparams> grid;
    for (int depth : {4, 8, -1})
        for (int leaf : {2, 5, 10})
            for (int subset : {third, static_cast<int>(n_features)}) {
                Hyperparams hp;
                hp.n_trees = 100;
                hp.max_depth = depth;
                hp.min_leaf = leaf;
                hp.feature_subset = subset;
                grid.push_back(hp);
            }
    return grid;
}

namespace {

// Simplicity order for tie-breaking: shallower trees first (unlimited depth
// last), larger leaves first, smaller feature subsets first, fewer trees
// first.
std::tuple<int, int, int, int> complexity_key(const Hyperparams& hp) {
    int depth_rank = hp.max_depth < 0 ? INT32_MAX : hp.max_depth;
    return {depth_rank, -hp.min_leaf, hp.feature_subset, hp.n_trees};
}

std::vector<TractSample> take(const std::vector<TractSample>& samples,
                              const std::vector<size_t>& idx) {
    std::vector<TractSample> out;
    out.reserve(idx.size());
    for (size_t i : idx) out.push_back(samples[i]);
    return out;
}

double score_model(const ForestModel& m, const std::vector<TractSample>& test) {
    std::vector<double> pred, obs;
    pred.reserve(test.size());
    obs.reserve(test.size());
    for (const auto& s : test) {
        pred.push_back(m.predict(s.features));
        obs.push_back(s.target);
    }
    return score_r2_linear(pred, obs);
}

} // namespace

CVResult nested_cv(const std::vector<TractSample>& samples,
                   const std::vector<Hyperparams>& grid, int k_outer, int k_inner,
                   uint64_t seed, FoldAudit* audit) {
    if (grid.empty()) throw ConfigError("empty hyperparameter grid");
    if (k_outer < 2 || k_inner < 2) throw ConfigError("need at least 2 folds at each level");
    if (samples.size() < static_cast<size_t>(k_outer))
        throw DataError("fewer samples than outer folds");

    CVResult res;
    res.report.outer_fold = assign_folds(samples, k_outer, seed, "outer-folds");
    if (audit) {
        audit->outer_test.assign(static_cast<size_t>(k_outer), {});
        audit->inner_valid.assign(static_cast<size_t>(k_outer), {});
    }

    for (int fold = 0; fold < k_outer; ++fold) {
        std::vector<size_t> train_idx, test_idx;
        for (size_t i = 0; i < samples.size(); ++i)
            (res.report.outer_fold[i] == fold ? test_idx : train_idx).push_back(i);
        if (test_idx.empty() || train_idx.empty())
            throw DataError("outer fold " + std::to_string(fold) + " is empty");
        if (audit) audit->outer_test[static_cast<size_t>(fold)] = test_idx;

        auto train = take(samples, train_idx);

        // Inner folds are assigned over outer-train only, so outer-test
        // indices are unreachable here by construction.
        auto inner_fold =
            assign_folds(train, k_inner,
                         derive_seed(seed, "inner-folds", static_cast<uint64_t>(fold)),
                         "inner-folds");
        if (audit) {
            auto& slots = audit->inner_valid[static_cast<size_t>(fold)];
            slots.assign(static_cast<size_t>(k_inner), {});
            for (size_t i = 0; i < train.size(); ++i)
                slots[static_cast<size_t>(inner_fold[i])].push_back(train_idx[i]);
        }

        size_t best_g = 0;
        double best_mean = -1;
        for (size_t g = 0; g < grid.size(); ++g) {
            double sum = 0;
            int used = 0;
            for (int inner = 0; inner < k_inner; ++inner) {
                std::vector<size_t> it_idx, iv_idx;
                for (size_t i = 0; i < train.size(); ++i)
                    (inner_fold[i] == inner ? iv_idx : it_idx).push_back(i);
                if (it_idx.empty() || iv_idx.empty()) continue;
                auto mdl = fit_forest(take(train, it_idx), grid[g],
                                      derive_seed(seed, "inner-fit",
                                                  static_cast<uint64_t>(fold) * 1000 +
                                                      static_cast<uint64_t>(inner) * 100 + g));
                sum += score_model(mdl, take(train, iv_idx));
                ++used;
            }
            double mean = used ? sum / used : -1;
            if (mean > best_mean ||
                (mean == best_mean && complexity_key(grid[g]) < complexity_key(grid[best_g]))) {
                best_mean = mean;
                best_g = g;
            }
        }

        auto refit = fit_forest(train, grid[best_g],
                                derive_seed(seed, "outer-fit", static_cast<uint64_t>(fold)));
        FoldResult fr;
        fr.chosen = grid[best_g];
        fr.r2 = score_model(refit, take(samples, test_idx));
        res.report.outer.push_back(fr);
    }

    double mean = 0;
    for (const auto& f : res.report.outer) mean += f.r2;
    mean /= static_cast<double>(res.report.outer.size());
    double var = 0;
    for (const auto& f : res.report.outer) var += (f.r2 - mean) * (f.r2 - mean);
    res.report.mean_r2 = mean;
    res.report.std_r2 = std::sqrt(var / static_cast<double>(res.report.outer.size()));

    // Modal hyperparameters across outer folds, simplest on ties.
    std::map<std::tuple<int, int, int, int>, std::pair<int, Hyperparams>> votes;
    for (const auto& f : res.report.outer) {
        auto key = std::tuple{f.chosen.n_trees, f.chosen.max_depth, f.chosen.min_leaf,
                              f.chosen.feature_subset};
        auto& v = votes[key];
        ++v.first;
        v.second = f.chosen;
    }
    int best_votes = 0;
    for (const auto& [_, v] : votes) {
        if (v.first > best_votes ||
            (v.first == best_votes &&
             complexity_key(v.second) < complexity_key(res.report.final_hp))) {
            best_votes = v.first;
            res.report.final_hp = v.second;
        }
    }
    res.final_model =
        fit_forest(samples, res.report.final_hp, derive_seed(seed, "final-fit", 0));
    return res;
}

CityMatrix city_matrix(const std::map<std::string, std::vector<TractSample>>& by_city,
                       const std::vector<Hyperparams>& grid, int k_outer, int k_inner,
                       uint64_t seed, std::map<std::string, ForestModel>* finals) {
    CityMatrix m;
    for (const auto& [city, _] : by_city) m.cities.push_back(city);
    std::sort(m.cities.begin(), m.cities.end());

    std::map<std::string, ForestModel> local;
    std::map<std::string, ForestModel>& fit = finals ? *finals : local;
    fit.clear();
    for (size_t c = 0; c < m.cities.size(); ++c) {
        auto cv = nested_cv(by_city.at(m.cities[c]), grid, k_outer, k_inner,
                            derive_seed(seed, "city-cv", c));
        m.diagonal_cv.emplace(m.cities[c], cv.report);
        fit.emplace(m.cities[c], std::move(cv.final_model));
    }

    m.score.assign(m.cities.size(), std::vector<double>(m.cities.size(), 0));
    for (size_t a = 0; a < m.cities.size(); ++a)
        for (size_t b = 0; b < m.cities.size(); ++b)
            m.score[a][b] = a == b ? m.diagonal_cv.at(m.cities[a]).mean_r2
                                   : score_model(fit.at(m.cities[a]),
                                                 by_city.at(m.cities[b]));
    return m;
}

std::vector<LooEntry> leave_one_out(const std::map<std::string, std::vector<TractSample>>& by_city,
                                    const std::vector<Hyperparams>& grid, int k_outer,
                                    int k_inner, uint64_t seed) {
    std::vector<LooEntry> out;
    uint64_t c = 0;
    for (const auto& [held_out, test_samples] : by_city) {
        std::vector<TractSample> pool;
        for (const auto& [city, samples] : by_city)
            if (city != held_out) pool.insert(pool.end(), samples.begin(), samples.end());
        if (pool.empty()) throw DataError("leave-one-out needs at least two cities");
        auto cv = nested_cv(pool, grid, k_outer, k_inner, derive_seed(seed, "loo-cv", c++));
        LooEntry e;
        e.city = held_out;
        e.train_score = cv.report.mean_r2;
        e.test_score = score_model(cv.final_model, test_samples);
        out.push_back(std::move(e));
    }
    return out;
}

void write_model_json(const std::string& path, const ForestModel& m,
                      const std::vector<std::string>& feature_names) {
    nlohmann::json doc;
    doc["feature_names"] = feature_names;
    doc["n_features"] = m.n_features;
    doc["seed"] = m.seed;
    doc["hyperparameters"] = {{"n_trees", m.hp.n_trees},
                              {"max_depth", m.hp.max_depth},
                              {"min_leaf", m.hp.min_leaf},
                              {"feature_subset", m.hp.feature_subset},
                              {"bootstrap", m.hp.bootstrap}};
    auto& trees = doc["trees"] = nlohmann::json::array();
    for (const auto& t : m.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes)
            nodes.push_back({{"feature", n.feature},
                             {"threshold", n.threshold},
                             {"left", n.left},
                             {"right", n.right},
                             {"value", n.value},
                             {"cover", n.cover}});
        trees.push_back(std::move(nodes));
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path);
    out << doc.dump(2) << "\n";
}

ForestModel read_model_json(const std::string& path, std::vector<std::string>* feature_names) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": invalid model JSON: " + e.what());
    }
    ForestModel m;
    if (feature_names)
        *feature_names = doc.value("feature_names", std::vector<std::string>{});
    m.n_features = doc.value("n_features", size_t{0});
    m.seed = doc.value("seed", uint64_t{0});
    const auto& hp = doc.at("hyperparameters");
    m.hp.n_trees = hp.value("n_trees", 100);
    m.hp.max_depth = hp.value("max_depth", -1);
    m.hp.min_leaf = hp.value("min_leaf", 2);
    m.hp.feature_subset = hp.value("feature_subset", -1);
    m.hp.bootstrap = hp.value("bootstrap", true);
    for (const auto& tj : doc.at("trees")) {
        Tree t;
        for (const auto& nj : tj) {
            TreeNode n;
            n.feature = nj.at("feature").get<int>();
            n.threshold = nj.at("threshold").get<double>();
            n.left = nj.at("left").get<int>();
            n.right = nj.at("right").get<int>();
            n.value = nj.at("value").get<double>();
            n.cover = nj.at("cover").get<double>();
            t.nodes.push_back(n);
        }
        if (t.nodes.empty()) throw DataError(path + ": tree with no nodes");
        m.trees.push_back(std::move(t));
    }
    return m;
}

} // namespace mobaudit::model
