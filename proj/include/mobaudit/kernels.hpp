#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

// Data-parallel inner loops of the spatial join, with scalar reference
// implementations and AVX2 variants selected at runtime. Scalar and SIMD
// paths use the same multiply-form arithmetic (no division, no FMA), so
// their results are required to be identical, not merely close; the test
// suite asserts exact agreement.

namespace mobaudit::kernels {

// Crossing parity of a horizontal ray from (px, py) towards +x against one
// closed ring. `xs`/`ys` hold n vertices where the last vertex repeats the
// first, i.e. edges are (i, i+1) for i in [0, n-1). Even-odd rule with the
// half-open edge convention: a point on a border shared by two regions lands
// in exactly one of them.
bool ring_parity_scalar(const double* xs, const double* ys, size_t n,
                        double px, double py);
bool ring_parity_avx2(const double* xs, const double* ys, size_t n,
                      double px, double py);

// Append to `out` every index i in [0, n) whose box [minx[i], maxx[i]] x
// [miny[i], maxy[i]] contains (px, py), bounds inclusive. SoA layout.
void bbox_collect_scalar(const double* minx, const double* miny,
                         const double* maxx, const double* maxy, size_t n,
                         double px, double py, const uint32_t* ids,
                         std::vector<uint32_t>& out);
void bbox_collect_avx2(const double* minx, const double* miny,
                       const double* maxx, const double* maxy, size_t n,
                       double px, double py, const uint32_t* ids,
                       std::vector<uint32_t>& out);

using RingParityFn = bool (*)(const double*, const double*, size_t, double, double);
using BboxCollectFn = void (*)(const double*, const double*, const double*,
                               const double*, size_t, double, double,
                               const uint32_t*, std::vector<uint32_t>&);

struct KernelSet {
    RingParityFn ring_parity;
    BboxCollectFn bbox_collect;
    const char* name;
};

// Resolved once per process: AVX2 when the CPU supports it, overridable with
// MOBAUDIT_KERNEL=scalar|avx2 in the environment or force_kernels().
const KernelSet& active();
void force(const char* name); // "scalar" or "avx2"; throws ConfigError otherwise
bool avx2_supported();

} // namespace mobaudit::kernels
