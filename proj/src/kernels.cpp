#include "mobaudit/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "mobaudit/errors.hpp"

namespace mobaudit::kernels {

namespace {

const KernelSet kScalar{ring_parity_scalar, bbox_collect_scalar, "scalar"};
const KernelSet kAvx2{ring_parity_avx2, bbox_collect_avx2, "avx2"};

const KernelSet* g_active = nullptr;

const KernelSet* resolve() {
    if (const char* env = std::getenv("MOBAUDIT_KERNEL")) {
        if (std::strcmp(env, "scalar") == 0) return &kScalar;
        if (std::strcmp(env, "avx2") == 0) return &kAvx2;
    }
    return avx2_supported() ? &kAvx2 : &kScalar;
}

} // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelSet& active() {
    if (!g_active) g_active = resolve();
    return *g_active;
}

void force(const char* name) {
    if (std::strcmp(name, "scalar") == 0) {
        g_active = &kScalar;
    } else if (std::strcmp(name, "avx2") == 0) {
        g_active = &kAvx2;
    } else {
        throw ConfigError(std::string("unknown kernel '") + name + "' (scalar|avx2)");
    }
}

} // namespace mobaudit::kernels
