#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mobaudit/census.hpp"
#include "mobaudit/csv.hpp"
#include "mobaudit/geo.hpp"

namespace mobaudit::ingest {

struct PingRecord {
    std::string user_id;
    int64_t timestamp = 0; // seconds since Unix epoch, UTC
    double lat = 0;
    double lon = 0;
};

struct PingSchema {
    std::string user_col = "user_id";
    std::string ts_col = "timestamp";
    std::string lat_col = "lat";
    std::string lon_col = "lon";
    char delimiter = ',';
};

// Inclusive start / exclusive end, local hours; wraps midnight when
// start_hour > end_hour (the 22-06 default covers [22,24) U [0,6)).
struct NightWindow {
    int start_hour = 22;
    int end_hour = 6;
};

bool is_night(int64_t ts_utc, double tz_offset_hours, const NightWindow& w);

// Streaming ping parser. Malformed rows (bad field count, unparseable
// numbers, lat/lon out of range, empty user id) are counted, not fatal.
class PingReader {
public:
    PingReader(const std::string& path, const PingSchema& schema);
    std::optional<PingRecord> next();
    uint64_t malformed() const { return malformed_; }
    uint64_t rows_read() const { return rows_; }

private:
    CsvReader reader_;
    size_t user_idx_, ts_idx_, lat_idx_, lon_idx_;
    std::vector<std::string_view> fields_;
    uint64_t malformed_ = 0;
    uint64_t rows_ = 0;
};

struct UserProfile {
    std::string user_id;
    uint64_t ping_count = 0;
    uint64_t night_ping_count = 0;
    std::string home_bg;    // empty = no home resolvable
    std::string home_tract; // 11-char prefix of home_bg when present
    bool fallback_home = false; // inferred from all pings, not night pings
};

struct IngestStats {
    uint64_t rows = 0;
    uint64_t malformed = 0;
    uint64_t outside_window = 0;
    uint64_t outside_regions = 0;
    uint64_t assigned = 0;
    uint64_t fallback_users = 0;
};

struct IngestResult {
    std::vector<UserProfile> profiles; // sorted by user_id
    IngestStats stats;
};

// Optional UTC study window, [start, end).
struct StudyWindow {
    std::optional<int64_t> start;
    std::optional<int64_t> end;
};

// Single pass over the ping file building per-user counts and night
// block-group frequencies; a second pass covers only users whose home needs
// the all-ping fallback. Home = most frequent night block group, ties to the
// lexicographically smallest GEOID.
IngestResult ingest_pings(const std::string& path, const PingSchema& schema,
                          const geo::RegionIndex& index, const NightWindow& night,
                          double tz_offset_hours, const StudyWindow& window = {});

// Home choice from block-group frequency counts (exposed for testing).
std::string most_frequent_bg(const std::map<std::string, uint64_t>& counts);

struct UserFilterTally {
    uint64_t count_out_of_bounds = 0;
    uint64_t no_home = 0;
    uint64_t no_acs_tract = 0;
    uint64_t low_population = 0;
    uint64_t total_excluded() const {
        return count_out_of_bounds + no_home + no_acs_tract + low_population;
    }
};

// Retains users with min_pings < ping_count < max_pings (strict), a
// resolvable home tract present in the ACS table, and home-tract population
// >= min_population. Each excluded user lands in exactly one bucket, checked
// in that order.
std::pair<std::vector<UserProfile>, UserFilterTally>
filter_users(const std::vector<UserProfile>& profiles,
             const std::map<std::string, census::TractRecord>& tracts,
             uint64_t min_pings = 30, uint64_t max_pings = 100000,
             double min_population = 500);

void write_profiles(const std::string& path, const std::vector<UserProfile>& profiles);
std::vector<UserProfile> read_profiles(const std::string& path);

} // namespace mobaudit::ingest
