#include "mobaudit/inequality.hpp"

#include <algorithm>
#include <cmath>

#include "mobaudit/errors.hpp"

namespace mobaudit::ineq {

namespace {

double checked_total(const std::vector<double>& counts) {
    if (counts.empty()) throw UndefinedStatistic("inequality statistic on empty input");
    double total = 0;
    for (double c : counts) {
        if (c < 0) throw DataError("negative production count");
        total += c;
    }
    if (total <= 0) throw UndefinedStatistic("inequality statistic on all-zero input");
    return total;
}

} // namespace

double gini(std::vector<double> counts) {
    double total = checked_total(counts);
    std::sort(counts.begin(), counts.end());
    // sum_ij |x_i - x_j| = 2 * sum_i (2i - n - 1) * x_(i)  (1-indexed, ascending)
    const double n = static_cast<double>(counts.size());
    double acc = 0;
    for (size_t i = 0; i < counts.size(); ++i)
        acc += (2.0 * (static_cast<double>(i) + 1.0) - n - 1.0) * counts[i];
    // Cancellation can leave a tiny negative residue on near-equal inputs;
    // the statistic itself is bounded below by zero.
    return std::max(0.0, acc / (n * total));
}

std::vector<std::pair<double, double>> lorenz_points(std::vector<double> counts) {
    double total = checked_total(counts);
    std::sort(counts.begin(), counts.end());
    const double n = static_cast<double>(counts.size());
    std::vector<std::pair<double, double>> pts;
    pts.reserve(counts.size() + 1);
    pts.emplace_back(0.0, 0.0);
    double cum = 0;
    for (size_t k = 0; k < counts.size(); ++k) {
        cum += counts[k];
        pts.emplace_back((static_cast<double>(k) + 1.0) / n, cum / total);
    }
    pts.back() = {1.0, 1.0}; // pin the endpoint against rounding drift
    return pts;
}

double lorenz_at(const std::vector<std::pair<double, double>>& poly, double p) {
    if (poly.empty()) throw UndefinedStatistic("lorenz interpolation on empty polyline");
    if (p <= poly.front().first) return poly.front().second;
    if (p >= poly.back().first) return poly.back().second;
    auto it = std::lower_bound(poly.begin(), poly.end(), p,
                               [](const auto& pt, double v) { return pt.first < v; });
    if (it->first == p) return it->second;
    auto lo = std::prev(it);
    double t = (p - lo->first) / (it->first - lo->first);
    return lo->second + t * (it->second - lo->second);
}

std::vector<std::pair<double, double>> lorenz(std::vector<double> counts,
                                              const std::vector<double>& grid) {
    auto poly = lorenz_points(std::move(counts));
    std::vector<std::pair<double, double>> out;
    out.reserve(grid.size());
    for (double p : grid) {
        if (p < 0 || p > 1) throw ConfigError("lorenz grid fraction outside [0,1]");
        out.emplace_back(p, lorenz_at(poly, p));
    }
    return out;
}

double top_share(std::vector<double> counts, double top_fraction) {
    if (!(top_fraction > 0 && top_fraction < 1))
        throw ConfigError("top_fraction must be in (0,1)");
    double total = checked_total(counts);
    std::sort(counts.begin(), counts.end(), std::greater<>());
    auto k = static_cast<size_t>(
        std::ceil(top_fraction * static_cast<double>(counts.size())));
    k = std::min(k, counts.size());
    double top = 0;
    for (size_t i = 0; i < k; ++i) top += counts[i];
    return top / total;
}

} // namespace mobaudit::ineq
