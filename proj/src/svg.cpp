#include "mobaudit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mobaudit/errors.hpp"
#include "mobaudit/rng.hpp"

namespace mobaudit::svg {
namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void open_svg(std::string& out, int w, int h) {
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
           "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) +
           " " + std::to_string(h) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void text(std::string& out, double x, double y, const std::string& s,
          const char* anchor = "middle", int size = 12) {
    out += "<text x=\"" + fmt("%.1f", x) + "\" y=\"" + fmt("%.1f", y) +
           "\" font-family=\"sans-serif\" font-size=\"" + std::to_string(size) +
           "\" text-anchor=\"" + anchor + "\">" + s + "</text>\n";
}

} // namespace

std::string lorenz_svg(const std::vector<std::pair<double, double>>& curve, double gini) {
    if (curve.empty()) throw DataError("lorenz_svg needs a non-empty curve");
    const int W = 560, H = 520;
    const double x0 = 70, y0 = 40, pw = 440, ph = 400; // plot box
    auto px = [&](double v) { return x0 + v * pw; };
    auto py = [&](double v) { return y0 + (1 - v) * ph; };

    std::string out;
    open_svg(out, W, H);

    // frame and ticks every 0.25
    out += "<rect x=\"" + fmt("%.1f", x0) + "\" y=\"" + fmt("%.1f", y0) + "\" width=\"" +
           fmt("%.1f", pw) + "\" height=\"" + fmt("%.1f", ph) +
           "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double v = i * 0.25;
        text(out, px(v), y0 + ph + 18, fmt("%.2f", v));
        text(out, x0 - 8, py(v) + 4, fmt("%.2f", v), "end");
    }
    text(out, x0 + pw / 2, H - 14, "cumulative share of users");
    out += "<text x=\"18\" y=\"" + fmt("%.1f", y0 + ph / 2) +
           "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 18 " +
           fmt("%.1f", y0 + ph / 2) + ")\">cumulative share of pings</text>\n";

    // equality line in red, observed curve in black
    out += "<line x1=\"" + fmt("%.1f", px(0)) + "\" y1=\"" + fmt("%.1f", py(0)) +
           "\" x2=\"" + fmt("%.1f", px(1)) + "\" y2=\"" + fmt("%.1f", py(1)) +
           "\" stroke=\"#c1272d\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n";
    std::string pts;
    for (const auto& [p, l] : curve)
        pts += fmt("%.2f", px(p)) + "," + fmt("%.2f", py(l)) + " ";
    pts.pop_back();
    out += "<polyline points=\"" + pts +
           "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";

    text(out, x0 + 12, y0 + 22, "Gini = " + fmt("%.3f", gini), "start", 14);
    out += "</svg>\n";
    return out;
}

std::string beeswarm_svg(const std::vector<std::vector<double>>& percent,
                         const std::vector<std::vector<double>>& feature_values,
                         const std::vector<std::string>& feature_names) {
    size_t n = percent.size();
    size_t d = feature_names.size();
    if (n == 0 || d == 0) throw DataError("beeswarm_svg needs samples and features");
    if (feature_values.size() != n)
        throw DataError("beeswarm_svg: percent and feature_values disagree on samples");

    // rank rows by mean |percent|, largest effect on top
    std::vector<double> mean_abs(d, 0);
    for (const auto& row : percent)
        for (size_t f = 0; f < d; ++f) mean_abs[f] += std::fabs(row[f]) / double(n);
    std::vector<size_t> order(d);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (mean_abs[a] != mean_abs[b]) return mean_abs[a] > mean_abs[b];
        return feature_names[a] < feature_names[b];
    });

    double lo = 0, hi = 0;
    for (const auto& row : percent)
        for (double v : row) lo = std::min(lo, v), hi = std::max(hi, v);
    if (hi - lo < 1e-12) hi = lo + 1; // flat attributions still need an axis

    // per-feature value range for the color scale
    std::vector<double> vmin(d, 1e300), vmax(d, -1e300);
    for (const auto& row : feature_values)
        for (size_t f = 0; f < d; ++f)
            vmin[f] = std::min(vmin[f], row[f]), vmax[f] = std::max(vmax[f], row[f]);

    const double row_h = 30, x0 = 170, pw = 480;
    const int W = int(x0 + pw + 40), H = int(row_h * double(d) + 90);
    const double y_top = 30;
    auto px = [&](double v) { return x0 + (v - lo) / (hi - lo) * pw; };

    std::string out;
    open_svg(out, W, H);
    text(out, x0 + pw / 2, 18, "per-tract contribution (% of city median production)");

    // zero line
    if (lo < 0 && hi > 0)
        out += "<line x1=\"" + fmt("%.1f", px(0)) + "\" y1=\"" + fmt("%.1f", y_top) +
               "\" x2=\"" + fmt("%.1f", px(0)) + "\" y2=\"" +
               fmt("%.1f", y_top + row_h * double(d)) + "\" stroke=\"#bbb\"/>\n";

    for (size_t r = 0; r < d; ++r) {
        size_t f = order[r];
        double cy = y_top + row_h * (double(r) + 0.5);
        text(out, x0 - 10, cy + 4, feature_names[f], "end");
        Rng jitter(derive_seed(42, "beeswarm", f));
        for (size_t s = 0; s < n; ++s) {
            double t = vmax[f] > vmin[f]
                           ? (feature_values[s][f] - vmin[f]) / (vmax[f] - vmin[f])
                           : 0.5;
            int red = int(std::lround(59 + t * (211 - 59)));
            int green = int(std::lround(111 - t * (111 - 58)));
            int blue = int(std::lround(182 - t * (182 - 58)));
            double y = cy + (jitter.uniform01() - 0.5) * (row_h - 10);
            out += "<circle cx=\"" + fmt("%.2f", px(percent[s][f])) + "\" cy=\"" +
                   fmt("%.2f", y) + "\" r=\"2.5\" fill=\"rgb(" + std::to_string(red) +
                   "," + std::to_string(green) + "," + std::to_string(blue) +
                   ")\" fill-opacity=\"0.75\"/>\n";
        }
    }

    // axis with min/zero/max labels
    double ay = y_top + row_h * double(d) + 16;
    out += "<line x1=\"" + fmt("%.1f", x0) + "\" y1=\"" + fmt("%.1f", ay - 10) +
           "\" x2=\"" + fmt("%.1f", x0 + pw) + "\" y2=\"" + fmt("%.1f", ay - 10) +
           "\" stroke=\"#444\"/>\n";
    text(out, px(lo), ay + 6, fmt("%+.1f%%", lo));
    if (lo < 0 && hi > 0) text(out, px(0), ay + 6, "0");
    text(out, px(hi), ay + 6, fmt("%+.1f%%", hi));
    out += "</svg>\n";
    return out;
}

} // namespace mobaudit::svg
