#include "mobaudit/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

namespace mobaudit::kernels {

// Four edges per iteration. Comparisons and mul/sub match the scalar kernel
// lane for lane; parity is accumulated per lane with XOR and folded at the
// end, since the even-odd rule is an XOR over edges in any order.
bool ring_parity_avx2(const double* xs, const double* ys, size_t n,
                      double px, double py) {
    if (n < 2) return false;
    const size_t n_edges = n - 1;
    const __m256d vpx = _mm256_set1_pd(px);
    const __m256d vpy = _mm256_set1_pd(py);
    const __m256d vzero = _mm256_setzero_pd();
    __m256d acc = _mm256_setzero_pd();

    size_t i = 0;
    for (; i + 4 <= n_edges; i += 4) {
        const __m256d yi = _mm256_loadu_pd(ys + i);
        const __m256d yj = _mm256_loadu_pd(ys + i + 1);
        const __m256d xi = _mm256_loadu_pd(xs + i);
        const __m256d xj = _mm256_loadu_pd(xs + i + 1);

        const __m256d gi = _mm256_cmp_pd(yi, vpy, _CMP_GT_OQ);
        const __m256d gj = _mm256_cmp_pd(yj, vpy, _CMP_GT_OQ);
        const __m256d straddle = _mm256_xor_pd(gi, gj);

        const __m256d dy = _mm256_sub_pd(yj, yi);
        const __m256d a = _mm256_mul_pd(_mm256_sub_pd(vpx, xi), dy);
        const __m256d b = _mm256_mul_pd(_mm256_sub_pd(xj, xi), _mm256_sub_pd(vpy, yi));

        const __m256d pos = _mm256_cmp_pd(dy, vzero, _CMP_GT_OQ);
        const __m256d a_lt_b = _mm256_cmp_pd(a, b, _CMP_LT_OQ);
        const __m256d b_lt_a = _mm256_cmp_pd(b, a, _CMP_LT_OQ);
        __m256d cond = _mm256_or_pd(_mm256_and_pd(pos, a_lt_b),
                                    _mm256_andnot_pd(pos, b_lt_a));
        cond = _mm256_and_pd(cond, straddle);
        acc = _mm256_xor_pd(acc, cond);
    }

    const unsigned lanes = static_cast<unsigned>(_mm256_movemask_pd(acc));
    bool inside = (__builtin_popcount(lanes) & 1) != 0;

    for (; i < n_edges; ++i) {
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

void bbox_collect_avx2(const double* minx, const double* miny,
                       const double* maxx, const double* maxy, size_t n,
                       double px, double py, const uint32_t* ids,
                       std::vector<uint32_t>& out) {
    const __m256d vpx = _mm256_set1_pd(px);
    const __m256d vpy = _mm256_set1_pd(py);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mx = _mm256_and_pd(
            _mm256_cmp_pd(vpx, _mm256_loadu_pd(minx + i), _CMP_GE_OQ),
            _mm256_cmp_pd(vpx, _mm256_loadu_pd(maxx + i), _CMP_LE_OQ));
        const __m256d my = _mm256_and_pd(
            _mm256_cmp_pd(vpy, _mm256_loadu_pd(miny + i), _CMP_GE_OQ),
            _mm256_cmp_pd(vpy, _mm256_loadu_pd(maxy + i), _CMP_LE_OQ));
        unsigned bits = static_cast<unsigned>(_mm256_movemask_pd(_mm256_and_pd(mx, my)));
        while (bits) {
            const unsigned k = static_cast<unsigned>(__builtin_ctz(bits));
            out.push_back(ids[i + k]);
            bits &= bits - 1;
        }
    }
    for (; i < n; ++i) {
        if (px >= minx[i] && px <= maxx[i] && py >= miny[i] && py <= maxy[i]) {
            out.push_back(ids[i]);
        }
    }
}

} // namespace mobaudit::kernels

#else // non-x86: AVX2 entry points forward to the scalar reference

namespace mobaudit::kernels {

bool ring_parity_avx2(const double* xs, const double* ys, size_t n,
                      double px, double py) {
    return ring_parity_scalar(xs, ys, n, px, py);
}

void bbox_collect_avx2(const double* minx, const double* miny,
                       const double* maxx, const double* maxy, size_t n,
                       double px, double py, const uint32_t* ids,
                       std::vector<uint32_t>& out) {
    bbox_collect_scalar(minx, miny, maxx, maxy, n, px, py, ids, out);
}

} // namespace mobaudit::kernels

#endif
