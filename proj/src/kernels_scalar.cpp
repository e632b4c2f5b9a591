#include "mobaudit/kernels.hpp"

namespace mobaudit::kernels {

// Multiply-form PNPOLY crossing test. The textbook form divides by
// (yj - yi); here both sides are multiplied through so the SIMD variant can
// match it operation for operation. With dy != 0 (guaranteed by the straddle
// test) the two forms select the same edges except on FP-borderline inputs,
// which is why every caller in this project uses this form and only this form.
bool ring_parity_scalar(const double* xs, const double* ys, size_t n,
                        double px, double py) {
    bool inside = false;
    for (size_t i = 0; i + 1 < n; ++i) {
        const double yi = ys[i];
        const double yj = ys[i + 1];
        if ((yi > py) == (yj > py)) continue;
        const double dy = yj - yi;
        const double a = (px - xs[i]) * dy;
        const double b = (xs[i + 1] - xs[i]) * (py - yi);
        if (dy > 0.0 ? (a < b) : (b < a)) inside = !inside;
    }
    return inside;
}

void bbox_collect_scalar(const double* minx, const double* miny,
                         const double* maxx, const double* maxy, size_t n,
                         double px, double py, const uint32_t* ids,
                         std::vector<uint32_t>& out) {
    for (size_t i = 0; i < n; ++i) {
        if (px >= minx[i] && px <= maxx[i] && py >= miny[i] && py <= maxy[i]) {
            out.push_back(ids[i]);
        }
    }
}

} // namespace mobaudit::kernels
