#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace mobaudit::ineq {

// Sample Gini index: sum_ij |x_i - x_j| / (2 n^2 mean). Permutation- and
// scale-invariant; computed with the O(n log n) sorted identity.
// Throws UndefinedStatistic on empty or all-zero input, DataError on
// negative counts.
double gini(std::vector<double> counts);

// Lorenz polyline at user boundaries: n+1 points (k/n, sum of k smallest /
// total) for k = 0..n, starting at (0,0), ending at (1,1).
std::vector<std::pair<double, double>> lorenz_points(std::vector<double> counts);

// L(p) by piecewise-linear interpolation on a lorenz_points polyline.
double lorenz_at(const std::vector<std::pair<double, double>>& poly, double p);

// Lorenz curve sampled at the given population-share grid (each in [0,1]).
std::vector<std::pair<double, double>> lorenz(std::vector<double> counts,
                                              const std::vector<double>& grid);

// Share of total production held by the ceil(top_fraction * n) highest-count
// users. top_fraction must lie strictly in (0, 1).
double top_share(std::vector<double> counts, double top_fraction);

} // namespace mobaudit::ineq
