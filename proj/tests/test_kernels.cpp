#include <doctest.h>

#include <cmath>
#include <vector>

#include "mobaudit/errors.hpp"
#include "mobaudit/kernels.hpp"
#include "mobaudit/rng.hpp"

using namespace mobaudit;

namespace {

struct Poly {
    std::vector<double> xs, ys;
};

// Random simple-ish closed ring: vertices at jittered radii around a center,
// sorted by angle. Always non-self-intersecting, frequently concave.
Poly random_star(Rng& rng, double cx, double cy, size_t nverts) {
    Poly p;
    p.xs.reserve(nverts + 1);
    p.ys.reserve(nverts + 1);
    for (size_t i = 0; i < nverts; ++i) {
        double ang = 2.0 * 3.14159265358979323846 * (static_cast<double>(i) + rng.uniform01() * 0.6) /
                     static_cast<double>(nverts);
        double rad = 0.3 + 1.7 * rng.uniform01();
        p.xs.push_back(cx + rad * std::cos(ang));
        p.ys.push_back(cy + rad * std::sin(ang));
    }
    p.xs.push_back(p.xs.front());
    p.ys.push_back(p.ys.front());
    return p;
}

} // namespace

TEST_CASE("ring parity: unit square basics") {
    std::vector<double> xs{0, 1, 1, 0, 0};
    std::vector<double> ys{0, 0, 1, 1, 0};
    CHECK(kernels::ring_parity_scalar(xs.data(), ys.data(), xs.size(), 0.5, 0.5));
    CHECK_FALSE(kernels::ring_parity_scalar(xs.data(), ys.data(), xs.size(), 1.5, 0.5));
    CHECK_FALSE(kernels::ring_parity_scalar(xs.data(), ys.data(), xs.size(), -0.5, 0.5));
    CHECK_FALSE(kernels::ring_parity_scalar(xs.data(), ys.data(), xs.size(), 0.5, -0.5));
    CHECK_FALSE(kernels::ring_parity_scalar(xs.data(), ys.data(), xs.size(), 0.5, 1.5));
}

TEST_CASE("ring parity: concave polygon") {
    // A "U" shape: the notch between the arms is outside.
    std::vector<double> xs{0, 4, 4, 3, 3, 1, 1, 0, 0};
    std::vector<double> ys{0, 0, 3, 3, 1, 1, 3, 3, 0};
    CHECK(kernels::ring_parity_scalar(xs.data(), ys.data(), xs.size(), 0.5, 2.0));
    CHECK(kernels::ring_parity_scalar(xs.data(), ys.data(), xs.size(), 3.5, 2.0));
    CHECK_FALSE(kernels::ring_parity_scalar(xs.data(), ys.data(), xs.size(), 2.0, 2.0));
    CHECK(kernels::ring_parity_scalar(xs.data(), ys.data(), xs.size(), 2.0, 0.5));
}

TEST_CASE("ring parity: shared border belongs to exactly one tile") {
    // Four unit squares tiling [0,2]x[0,2]; every probe point, including ones
    // on shared edges and the center corner, must land in exactly one tile.
    struct Sq {
        std::vector<double> xs, ys;
    };
    std::vector<Sq> tiles;
    for (int ty = 0; ty < 2; ++ty)
        for (int tx = 0; tx < 2; ++tx) {
            double x0 = tx, y0 = ty, x1 = tx + 1.0, y1 = ty + 1.0;
            tiles.push_back({{x0, x1, x1, x0, x0}, {y0, y0, y1, y1, y0}});
        }
    std::vector<std::pair<double, double>> probes{
        {1.0, 0.5},  {1.0, 1.5},  {0.5, 1.0},  {1.5, 1.0},  {1.0, 1.0},
        {0.5, 0.5},  {1.5, 1.5},  {1.0, 0.25}, {0.25, 1.0}, {1.0, 1.75},
    };
    for (auto [px, py] : probes) {
        int hits = 0;
        for (const auto& t : tiles)
            hits += kernels::ring_parity_scalar(t.xs.data(), t.ys.data(), t.xs.size(), px, py);
        CHECK_MESSAGE(hits == 1, "point (", px, ",", py, ") hit ", hits, " tiles");
    }
}

TEST_CASE("ring parity: scalar and avx2 agree exactly") {
    if (!kernels::avx2_supported()) return;
    Rng rng(derive_seed(99, "kernel-equivalence", 0));
    for (int trial = 0; trial < 200; ++trial) {
        size_t nverts = 3 + rng.uniform_index(40);
        Poly p = random_star(rng, rng.uniform(-5, 5), rng.uniform(-5, 5), nverts);
        for (int q = 0; q < 50; ++q) {
            double px = rng.uniform(-8, 8), py = rng.uniform(-8, 8);
            bool s = kernels::ring_parity_scalar(p.xs.data(), p.ys.data(), p.xs.size(), px, py);
            bool v = kernels::ring_parity_avx2(p.xs.data(), p.ys.data(), p.xs.size(), px, py);
            REQUIRE(s == v);
        }
        // Probes on vertices and edge midpoints stress the tie-breaking paths.
        for (size_t i = 0; i + 1 < p.xs.size(); ++i) {
            double mx = (p.xs[i] + p.xs[i + 1]) / 2, my = (p.ys[i] + p.ys[i + 1]) / 2;
            for (auto [px, py] : {std::pair{p.xs[i], p.ys[i]}, std::pair{mx, my}}) {
                bool s = kernels::ring_parity_scalar(p.xs.data(), p.ys.data(), p.xs.size(), px, py);
                bool v = kernels::ring_parity_avx2(p.xs.data(), p.ys.data(), p.xs.size(), px, py);
                REQUIRE(s == v);
            }
        }
    }
}

TEST_CASE("bbox collect: matches naive filter, scalar == avx2") {
    Rng rng(derive_seed(99, "bbox-equivalence", 0));
    for (int trial = 0; trial < 100; ++trial) {
        size_t n = rng.uniform_index(30); // include tiny and empty inputs
        std::vector<double> minx(n), miny(n), maxx(n), maxy(n);
        std::vector<uint32_t> ids(n);
        for (size_t i = 0; i < n; ++i) {
            double x0 = rng.uniform(-5, 5), y0 = rng.uniform(-5, 5);
            minx[i] = x0;
            miny[i] = y0;
            maxx[i] = x0 + rng.uniform(0, 4);
            maxy[i] = y0 + rng.uniform(0, 4);
            ids[i] = static_cast<uint32_t>(i * 7 + 3);
        }
        for (int q = 0; q < 20; ++q) {
            double px = rng.uniform(-6, 6), py = rng.uniform(-6, 6);
            std::vector<uint32_t> naive;
            for (size_t i = 0; i < n; ++i)
                if (px >= minx[i] && px <= maxx[i] && py >= miny[i] && py <= maxy[i])
                    naive.push_back(ids[i]);
            std::vector<uint32_t> s, v;
            kernels::bbox_collect_scalar(minx.data(), miny.data(), maxx.data(), maxy.data(), n,
                                         px, py, ids.data(), s);
            CHECK(s == naive);
            if (kernels::avx2_supported()) {
                kernels::bbox_collect_avx2(minx.data(), miny.data(), maxx.data(), maxy.data(), n,
                                           px, py, ids.data(), v);
                CHECK(v == naive);
            }
        }
    }
}

TEST_CASE("kernel dispatch: force and report") {
    kernels::force("scalar");
    CHECK(std::string(kernels::active().name) == "scalar");
    if (kernels::avx2_supported()) {
        kernels::force("avx2");
        CHECK(std::string(kernels::active().name) == "avx2");
    }
    CHECK_THROWS_AS(kernels::force("sse9"), ConfigError);
    kernels::force(kernels::avx2_supported() ? "avx2" : "scalar");
}
