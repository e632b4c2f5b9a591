#include "mobaudit/rng.hpp"

#include <algorithm>

namespace mobaudit {

uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index) {
    // FNV-1a over the label folded into a splitmix chain with the index.
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    uint64_t state = master;
    uint64_t a = splitmix64(state);
    state = a ^ h;
    uint64_t b = splitmix64(state);
    state = b + index * 0x9e3779b97f4a7c15ULL;
    return splitmix64(state);
}

size_t Rng::sample_cdf(const std::vector<double>& cdf) {
    if (cdf.empty()) return 0;
    double u = uniform01() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    return static_cast<size_t>(it - cdf.begin());
}

} // namespace mobaudit
