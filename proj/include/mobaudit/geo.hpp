#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mobaudit::geo {

// Closed vertex loop: first vertex repeated at the end. x = lon, y = lat.
struct Ring {
    std::vector<double> xs;
    std::vector<double> ys;
};

struct Region {
    std::string geoid;       // block-group (12 chars) or tract (11 chars) GEOID
    std::vector<Ring> rings; // outer rings and holes, combined by the even-odd rule
    double minx = 0, miny = 0, maxx = 0, maxy = 0;
};

// Immutable after build; shared freely across threads.
class RegionIndex {
public:
    static RegionIndex build(std::vector<Region> regions);

    // Slot of the region containing the point, via grid prefilter + crossing
    // parity. Ties (possible only with overlapping input geometry) resolve to
    // the lowest slot. nullopt when outside every region.
    std::optional<uint32_t> locate(double lon, double lat) const;

    // Exhaustive scan over all regions, no grid. Same kernels, same tie rule.
    std::optional<uint32_t> locate_scan(double lon, double lat) const;

    const Region& region(uint32_t slot) const { return regions_[slot]; }
    const std::string& geoid(uint32_t slot) const { return regions_[slot].geoid; }
    // Tract GEOID: 11-character prefix of the region GEOID.
    const std::string& tract(uint32_t slot) const { return tracts_[slot]; }
    size_t size() const { return regions_.size(); }

    std::optional<uint32_t> slot_of(const std::string& geoid) const;

private:
    bool region_contains(uint32_t slot, double lon, double lat) const;

    std::vector<Region> regions_;
    std::vector<std::string> tracts_;

    // Uniform grid over the global bbox. Each cell holds SoA bbox arrays of
    // the regions overlapping it, in ascending slot order.
    struct Cell {
        std::vector<double> minx, miny, maxx, maxy;
        std::vector<uint32_t> ids;
    };
    std::vector<Cell> cells_;
    size_t gw_ = 0, gh_ = 0;
    double gx0_ = 0, gy0_ = 0, inv_cw_ = 0, inv_ch_ = 0;
};

// GeoJSON FeatureCollection with Polygon/MultiPolygon geometries; the GEOID
// comes from the named feature property. Duplicate GEOIDs are a data error.
std::vector<Region> load_geojson(const std::string& path,
                                 const std::string& geoid_property = "GEOID");

// Great-circle distance in meters.
double haversine_m(double lat1, double lon1, double lat2, double lon2);

} // namespace mobaudit::geo
