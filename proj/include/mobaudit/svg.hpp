#pragma once

#include <string>
#include <utility>
#include <vector>

namespace mobaudit::svg {

// Lorenz plot: red dashed equality diagonal, observed curve in black, Gini
// annotated. `curve` is a polyline of (population share, production share)
// points in [0,1]^2. Output is a standalone SVG document; rendering the same
// inputs yields the same bytes.
std::string lorenz_svg(const std::vector<std::pair<double, double>>& curve, double gini);

// Beeswarm of per-tract attributions. percent[s][f] is sample s's
// contribution from feature f in percent-of-city-median units;
// feature_values[s][f] colors the point (blue = low, red = high within the
// feature's observed range). Rows are ranked by mean |percent|, largest on
// top. Jitter is seeded per feature, so the plot is byte-deterministic.
std::string beeswarm_svg(const std::vector<std::vector<double>>& percent,
                         const std::vector<std::vector<double>>& feature_values,
                         const std::vector<std::string>& feature_names);

} // namespace mobaudit::svg
