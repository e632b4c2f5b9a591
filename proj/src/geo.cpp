#include "mobaudit/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "mobaudit/errors.hpp"
#include "mobaudit/kernels.hpp"

namespace mobaudit::geo {

RegionIndex RegionIndex::build(std::vector<Region> regions) {
    RegionIndex idx;
    idx.regions_ = std::move(regions);
    idx.tracts_.reserve(idx.regions_.size());

    double gx0 = 1e300, gy0 = 1e300, gx1 = -1e300, gy1 = -1e300;
    for (auto& r : idx.regions_) {
        r.minx = 1e300;
        r.miny = 1e300;
        r.maxx = -1e300;
        r.maxy = -1e300;
        for (const auto& ring : r.rings) {
            for (size_t i = 0; i < ring.xs.size(); ++i) {
                r.minx = std::min(r.minx, ring.xs[i]);
                r.maxx = std::max(r.maxx, ring.xs[i]);
                r.miny = std::min(r.miny, ring.ys[i]);
                r.maxy = std::max(r.maxy, ring.ys[i]);
            }
        }
        gx0 = std::min(gx0, r.minx);
        gy0 = std::min(gy0, r.miny);
        gx1 = std::max(gx1, r.maxx);
        gy1 = std::max(gy1, r.maxy);
        idx.tracts_.push_back(r.geoid.size() > 11 ? r.geoid.substr(0, 11) : r.geoid);
    }

    if (idx.regions_.empty()) {
        idx.gw_ = idx.gh_ = 1;
        idx.cells_.resize(1);
        return idx;
    }

    // Aim for a few regions per cell on average; clamp so degenerate extents
    // (single region, zero-width bbox) still produce a usable 1x1 grid.
    size_t g = static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(idx.regions_.size()))));
    idx.gw_ = std::max<size_t>(1, g);
    idx.gh_ = std::max<size_t>(1, g);
    double w = gx1 - gx0, h = gy1 - gy0;
    if (w <= 0) w = 1e-9;
    if (h <= 0) h = 1e-9;
    idx.gx0_ = gx0;
    idx.gy0_ = gy0;
    idx.inv_cw_ = static_cast<double>(idx.gw_) / w;
    idx.inv_ch_ = static_cast<double>(idx.gh_) / h;
    idx.cells_.resize(idx.gw_ * idx.gh_);

    auto cell_x = [&](double x) {
        auto c = static_cast<long>((x - idx.gx0_) * idx.inv_cw_);
        return static_cast<size_t>(std::clamp<long>(c, 0, static_cast<long>(idx.gw_) - 1));
    };
    auto cell_y = [&](double y) {
        auto c = static_cast<long>((y - idx.gy0_) * idx.inv_ch_);
        return static_cast<size_t>(std::clamp<long>(c, 0, static_cast<long>(idx.gh_) - 1));
    };

    for (uint32_t id = 0; id < idx.regions_.size(); ++id) {
        const auto& r = idx.regions_[id];
        size_t cx0 = cell_x(r.minx), cx1 = cell_x(r.maxx);
        size_t cy0 = cell_y(r.miny), cy1 = cell_y(r.maxy);
        for (size_t cy = cy0; cy <= cy1; ++cy) {
            for (size_t cx = cx0; cx <= cx1; ++cx) {
                auto& cell = idx.cells_[cy * idx.gw_ + cx];
                cell.minx.push_back(r.minx);
                cell.miny.push_back(r.miny);
                cell.maxx.push_back(r.maxx);
                cell.maxy.push_back(r.maxy);
                cell.ids.push_back(id);
            }
        }
    }
    return idx;
}

bool RegionIndex::region_contains(uint32_t slot, double lon, double lat) const {
    const auto& r = regions_[slot];
    if (lon < r.minx || lon > r.maxx || lat < r.miny || lat > r.maxy) return false;
    const auto& k = kernels::active();
    bool inside = false;
    for (const auto& ring : r.rings)
        inside ^= k.ring_parity(ring.xs.data(), ring.ys.data(), ring.xs.size(), lon, lat);
    return inside;
}

std::optional<uint32_t> RegionIndex::locate(double lon, double lat) const {
    if (cells_.empty() || regions_.empty()) return std::nullopt;
    auto cx = static_cast<long>((lon - gx0_) * inv_cw_);
    auto cy = static_cast<long>((lat - gy0_) * inv_ch_);
    if (cx < 0 || cy < 0 || cx >= static_cast<long>(gw_) || cy >= static_cast<long>(gh_))
        return std::nullopt;
    const auto& cell = cells_[static_cast<size_t>(cy) * gw_ + static_cast<size_t>(cx)];
    if (cell.ids.empty()) return std::nullopt;

    // Candidate ids arrive in ascending slot order, so the first hit is the
    // lowest-slot containing region — same tie rule as the exhaustive scan.
    std::vector<uint32_t> cand;
    kernels::active().bbox_collect(cell.minx.data(), cell.miny.data(), cell.maxx.data(),
                                   cell.maxy.data(), cell.ids.size(), lon, lat, cell.ids.data(),
                                   cand);
    for (uint32_t id : cand)
        if (region_contains(id, lon, lat)) return id;
    return std::nullopt;
}

std::optional<uint32_t> RegionIndex::locate_scan(double lon, double lat) const {
    for (uint32_t id = 0; id < regions_.size(); ++id)
        if (region_contains(id, lon, lat)) return id;
    return std::nullopt;
}

std::optional<uint32_t> RegionIndex::slot_of(const std::string& geoid) const {
    for (uint32_t id = 0; id < regions_.size(); ++id)
        if (regions_[id].geoid == geoid) return id;
    return std::nullopt;
}

namespace {

Ring ring_from_coords(const nlohmann::json& coords, const std::string& path) {
    Ring ring;
    ring.xs.reserve(coords.size() + 1);
    ring.ys.reserve(coords.size() + 1);
    for (const auto& pt : coords) {
        if (!pt.is_array() || pt.size() < 2)
            throw DataError(path + ": ring vertex is not a [lon, lat] pair");
        ring.xs.push_back(pt[0].get<double>());
        ring.ys.push_back(pt[1].get<double>());
    }
    if (ring.xs.size() < 4)
        throw DataError(path + ": ring has fewer than 3 distinct vertices");
    if (ring.xs.front() != ring.xs.back() || ring.ys.front() != ring.ys.back()) {
        ring.xs.push_back(ring.xs.front());
        ring.ys.push_back(ring.ys.front());
    }
    return ring;
}

} // namespace

std::vector<Region> load_geojson(const std::string& path, const std::string& geoid_property) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open boundary file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": invalid JSON: " + e.what());
    }
    if (doc.value("type", "") != "FeatureCollection")
        throw DataError(path + ": expected a GeoJSON FeatureCollection");

    std::vector<Region> regions;
    std::unordered_map<std::string, size_t> seen;
    for (const auto& feat : doc.at("features")) {
        const auto& props = feat.at("properties");
        if (!props.contains(geoid_property))
            throw DataError(path + ": feature missing property '" + geoid_property + "'");
        Region r;
        const auto& gp = props.at(geoid_property);
        r.geoid = gp.is_string() ? gp.get<std::string>() : gp.dump();

        const auto& geom = feat.at("geometry");
        std::string gtype = geom.value("type", "");
        const auto& coords = geom.at("coordinates");
        if (gtype == "Polygon") {
            for (const auto& ring : coords) r.rings.push_back(ring_from_coords(ring, path));
        } else if (gtype == "MultiPolygon") {
            for (const auto& poly : coords)
                for (const auto& ring : poly) r.rings.push_back(ring_from_coords(ring, path));
        } else {
            throw DataError(path + ": unsupported geometry type '" + gtype + "' for GEOID " +
                            r.geoid);
        }
        auto [it, fresh] = seen.emplace(r.geoid, regions.size());
        if (!fresh) throw DataError(path + ": duplicate GEOID " + r.geoid);
        regions.push_back(std::move(r));
    }
    return regions;
}

double haversine_m(double lat1, double lon1, double lat2, double lon2) {
    constexpr double kEarthRadiusM = 6371000.0;
    constexpr double kDeg = 3.14159265358979323846 / 180.0;
    double dlat = (lat2 - lat1) * kDeg;
    double dlon = (lon2 - lon1) * kDeg;
    double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
               std::cos(lat1 * kDeg) * std::cos(lat2 * kDeg) * std::sin(dlon / 2) *
                   std::sin(dlon / 2);
    return 2 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

} // namespace mobaudit::geo
