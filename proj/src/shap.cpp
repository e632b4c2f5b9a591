#include "mobaudit/shap.hpp"

#include <algorithm>
#include <cmath>

#include "mobaudit/csv.hpp"
#include "mobaudit/errors.hpp"

namespace mobaudit::shap {

namespace {

// One step of the feature path: the feature that split here, the fraction of
// cover flowing down when the feature is "off" (z) and "on" (o), and the
// permutation weight accumulator.
struct PathElement {
    int d = -1;
    double z = 1;
    double o = 1;
    double w = 0;
};

void extend(std::vector<PathElement>& m, double pz, double po, int pi) {
    size_t l = m.size();
    m.push_back({pi, pz, po, l == 0 ? 1.0 : 0.0});
    for (size_t i = l; i-- > 0;) {
        m[i + 1].w += po * m[i].w * static_cast<double>(i + 1) / static_cast<double>(l + 1);
        m[i].w = pz * m[i].w * static_cast<double>(l - i) / static_cast<double>(l + 1);
    }
}

void unwind(std::vector<PathElement>& m, size_t k) {
    size_t depth = m.size() - 1;
    double po = m[k].o;
    double pz = m[k].z;
    double next_one = m[depth].w;
    for (size_t i = depth; i-- > 0;) {
        if (po != 0) {
            double tmp = m[i].w;
            m[i].w = next_one * static_cast<double>(depth + 1) /
                     (static_cast<double>(i + 1) * po);
            next_one = tmp - m[i].w * pz * static_cast<double>(depth - i) /
                                 static_cast<double>(depth + 1);
        } else {
            m[i].w = m[i].w * static_cast<double>(depth + 1) /
                     (pz * static_cast<double>(depth - i));
        }
    }
    for (size_t i = k; i < depth; ++i) {
        m[i].d = m[i + 1].d;
        m[i].z = m[i + 1].z;
        m[i].o = m[i + 1].o;
    }
    m.pop_back();
}

// Total permutation weight of the path with element k removed, leaving the
// path untouched.
double unwound_sum(const std::vector<PathElement>& m, size_t k) {
    size_t depth = m.size() - 1;
    double po = m[k].o;
    double pz = m[k].z;
    double next_one = m[depth].w;
    double total = 0;
    for (size_t i = depth; i-- > 0;) {
        if (po != 0) {
            double tmp = next_one * static_cast<double>(depth + 1) /
                         (static_cast<double>(i + 1) * po);
            total += tmp;
            next_one = m[i].w - tmp * pz * static_cast<double>(depth - i) /
                                    static_cast<double>(depth + 1);
        } else if (pz != 0) {
            total += m[i].w * static_cast<double>(depth + 1) /
                     (pz * static_cast<double>(depth - i));
        }
    }
    return total;
}

struct TreeWalker {
    const model::Tree& tree;
    const std::vector<double>& x;
    std::vector<double>& phi;

    void recurse(int node, std::vector<PathElement> m, double pz, double po, int pf) {
        extend(m, pz, po, pf);
        const auto& n = tree.nodes[node];
        if (n.feature < 0) {
            for (size_t i = 1; i < m.size(); ++i)
                phi[m[i].d] += unwound_sum(m, i) * (m[i].o - m[i].z) * n.value;
            return;
        }
        bool goes_left = x[n.feature] <= n.threshold;
        int hot = goes_left ? n.left : n.right;
        int cold = goes_left ? n.right : n.left;
        double iz = 1, io = 1;
        // A feature revisited along the path folds into one element.
        for (size_t k = 1; k < m.size(); ++k)
            if (m[k].d == n.feature) {
                iz = m[k].z;
                io = m[k].o;
                unwind(m, k);
                break;
            }
        double cover = n.cover;
        recurse(hot, m, iz * tree.nodes[hot].cover / cover, io, n.feature);
        recurse(cold, m, iz * tree.nodes[cold].cover / cover, 0, n.feature);
    }
};

double expectation(const model::Tree& t, int node) {
    const auto& n = t.nodes[node];
    if (n.feature < 0) return n.value;
    double cl = t.nodes[n.left].cover, cr = t.nodes[n.right].cover;
    return (cl * expectation(t, n.left) + cr * expectation(t, n.right)) / (cl + cr);
}

} // namespace

Attribution tree_shap_single(const model::Tree& t, size_t n_features,
                             const std::vector<double>& x) {
    if (x.size() != n_features)
        throw DataError("feature vector length " + std::to_string(x.size()) +
                        " does not match model with " + std::to_string(n_features) +
                        " features");
    Attribution a;
    a.phi.assign(n_features, 0.0);
    a.base = expectation(t, 0);
    if (t.nodes[0].feature < 0) return a; // single leaf: all phi stay zero
    TreeWalker walker{t, x, a.phi};
    walker.recurse(0, {}, 1, 1, -1);
    return a;
}

Attribution tree_shap(const model::ForestModel& m, const std::vector<double>& x) {
    if (m.trees.empty()) throw DataError("attribution on an empty forest");
    Attribution total;
    total.phi.assign(m.n_features, 0.0);
    for (const auto& t : m.trees) {
        auto a = tree_shap_single(t, m.n_features, x);
        total.base += a.base;
        for (size_t f = 0; f < total.phi.size(); ++f) total.phi[f] += a.phi[f];
    }
    double k = static_cast<double>(m.trees.size());
    total.base /= k;
    for (auto& p : total.phi) p /= k;
    return total;
}

std::vector<double> rescale_percent(const Attribution& a, double city_median_target) {
    if (city_median_target <= 0)
        throw UndefinedStatistic("percent rescaling needs a positive city median");
    std::vector<double> out;
    out.reserve(a.phi.size());
    for (double p : a.phi) out.push_back(100.0 * p / city_median_target);
    return out;
}

std::vector<ImportanceEntry> feature_importance(const std::vector<Attribution>& atts,
                                                const std::vector<std::string>& names) {
    if (atts.empty()) throw DataError("importance over zero attributions");
    std::vector<ImportanceEntry> out;
    out.reserve(names.size());
    for (size_t f = 0; f < names.size(); ++f) {
        double sum = 0;
        for (const auto& a : atts) sum += std::abs(a.phi.at(f));
        out.push_back({names[f], sum / static_cast<double>(atts.size())});
    }
    std::sort(out.begin(), out.end(), [](const ImportanceEntry& a, const ImportanceEntry& b) {
        if (a.mean_abs_phi != b.mean_abs_phi) return a.mean_abs_phi > b.mean_abs_phi;
        return a.feature < b.feature;
    });
    return out;
}

void write_attributions_csv(const std::string& path,
                            const std::vector<std::string>& tract_geoids,
                            const std::vector<Attribution>& atts,
                            const std::vector<std::string>& feature_names,
                            double city_median_target) {
    if (tract_geoids.size() != atts.size())
        throw DataError("attribution rows and tract ids disagree");
    CsvWriter w(path);
    w.write_row({"tract_geoid", "feature", "phi", "percent"});
    char buf[64];
    for (size_t i = 0; i < atts.size(); ++i) {
        auto pct = rescale_percent(atts[i], city_median_target);
        for (size_t f = 0; f < feature_names.size(); ++f) {
            snprintf(buf, sizeof buf, "%.6f", atts[i].phi[f]);
            std::string phi_s(buf);
            snprintf(buf, sizeof buf, "%.4f", pct[f]);
            w.write_row({tract_geoids[i], feature_names[f], phi_s, std::string(buf)});
        }
    }
}

} // namespace mobaudit::shap
