#include "mobaudit/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "mobaudit/errors.hpp"

namespace mobaudit::ingest {

bool is_night(int64_t ts_utc, double tz_offset_hours, const NightWindow& w) {
    int64_t local = ts_utc + llround(tz_offset_hours * 3600.0);
    int hour = static_cast<int>(((local % 86400 + 86400) % 86400) / 3600);
    if (w.start_hour <= w.end_hour) return hour >= w.start_hour && hour < w.end_hour;
    return hour >= w.start_hour || hour < w.end_hour;
}

PingReader::PingReader(const std::string& path, const PingSchema& schema)
    : reader_(path, schema.delimiter),
      user_idx_(reader_.require_column(schema.user_col)),
      ts_idx_(reader_.require_column(schema.ts_col)),
      lat_idx_(reader_.require_column(schema.lat_col)),
      lon_idx_(reader_.require_column(schema.lon_col)) {}

std::optional<PingRecord> PingReader::next() {
    while (reader_.next_row(fields_)) {
        ++rows_;
        size_t need = std::max({user_idx_, ts_idx_, lat_idx_, lon_idx_});
        if (fields_.size() <= need) {
            ++malformed_;
            continue;
        }
        auto ts = parse_i64(fields_[ts_idx_]);
        auto lat = parse_double(fields_[lat_idx_]);
        auto lon = parse_double(fields_[lon_idx_]);
        std::string_view user = fields_[user_idx_];
        if (!ts || !lat || !lon || user.empty() || *lat < -90 || *lat > 90 || *lon < -180 ||
            *lon > 180) {
            ++malformed_;
            continue;
        }
        return PingRecord{std::string(user), *ts, *lat, *lon};
    }
    return std::nullopt;
}

std::string most_frequent_bg(const std::map<std::string, uint64_t>& counts) {
    std::string best;
    uint64_t best_count = 0;
    // std::map iterates in ascending GEOID order, so strict > implements the
    // smallest-GEOID tie rule.
    for (const auto& [bg, n] : counts)
        if (n > best_count) {
            best = bg;
            best_count = n;
        }
    return best;
}

namespace {

struct UserAgg {
    uint64_t pings = 0;
    uint64_t night_pings = 0;
    std::map<std::string, uint64_t> night_bg; // block group -> night ping count
};

bool in_window(int64_t ts, const StudyWindow& w) {
    if (w.start && ts < *w.start) return false;
    if (w.end && ts >= *w.end) return false;
    return true;
}

} // namespace

IngestResult ingest_pings(const std::string& path, const PingSchema& schema,
                          const geo::RegionIndex& index, const NightWindow& night,
                          double tz_offset_hours, const StudyWindow& window) {
    IngestResult res;
    std::unordered_map<std::string, UserAgg> users;

    {
        PingReader reader(path, schema);
        while (auto ping = reader.next()) {
            if (!in_window(ping->timestamp, window)) {
                ++res.stats.outside_window;
                continue;
            }
            auto& agg = users[ping->user_id];
            ++agg.pings;
            bool at_night = is_night(ping->timestamp, tz_offset_hours, night);
            if (at_night) ++agg.night_pings;

            // The region join is only needed for night pings on the first
            // pass; day pings matter to home inference only in fallback mode.
            if (at_night) {
                if (auto slot = index.locate(ping->lon, ping->lat)) {
                    ++agg.night_bg[index.geoid(*slot)];
                    ++res.stats.assigned;
                } else {
                    ++res.stats.outside_regions;
                }
            }
        }
        res.stats.rows = reader.rows_read();
        res.stats.malformed = reader.malformed();
    }

    // Users whose night pings never landed in a region (or who have none)
    // need the all-ping fallback.
    std::unordered_set<std::string> fallback;
    for (const auto& [user, agg] : users)
        if (agg.night_bg.empty()) fallback.insert(user);

    std::unordered_map<std::string, std::map<std::string, uint64_t>> all_bg;
    if (!fallback.empty()) {
        PingReader reader(path, schema);
        while (auto ping = reader.next()) {
            if (!in_window(ping->timestamp, window)) continue;
            if (!fallback.count(ping->user_id)) continue;
            if (auto slot = index.locate(ping->lon, ping->lat))
                ++all_bg[ping->user_id][index.geoid(*slot)];
        }
    }

    res.profiles.reserve(users.size());
    for (auto& [user, agg] : users) {
        UserProfile p;
        p.user_id = user;
        p.ping_count = agg.pings;
        p.night_ping_count = agg.night_pings;
        if (!agg.night_bg.empty()) {
            p.home_bg = most_frequent_bg(agg.night_bg);
        } else {
            auto it = all_bg.find(user);
            if (it != all_bg.end() && !it->second.empty()) {
                p.home_bg = most_frequent_bg(it->second);
                p.fallback_home = true;
                ++res.stats.fallback_users;
            }
        }
        if (!p.home_bg.empty())
            p.home_tract = p.home_bg.size() > 11 ? p.home_bg.substr(0, 11) : p.home_bg;
        res.profiles.push_back(std::move(p));
    }
    std::sort(res.profiles.begin(), res.profiles.end(),
              [](const UserProfile& a, const UserProfile& b) { return a.user_id < b.user_id; });
    return res;
}

std::pair<std::vector<UserProfile>, UserFilterTally>
filter_users(const std::vector<UserProfile>& profiles,
             const std::map<std::string, census::TractRecord>& tracts, uint64_t min_pings,
             uint64_t max_pings, double min_population) {
    std::vector<UserProfile> kept;
    UserFilterTally tally;
    for (const auto& p : profiles) {
        if (p.ping_count <= min_pings || p.ping_count >= max_pings) {
            ++tally.count_out_of_bounds;
            continue;
        }
        if (p.home_tract.empty()) {
            ++tally.no_home;
            continue;
        }
        auto it = tracts.find(p.home_tract);
        if (it == tracts.end()) {
            ++tally.no_acs_tract;
            continue;
        }
        if (!it->second.population || *it->second.population < min_population) {
            ++tally.low_population;
            continue;
        }
        kept.push_back(p);
    }
    return {std::move(kept), tally};
}

void write_profiles(const std::string& path, const std::vector<UserProfile>& profiles) {
    CsvWriter w(path);
    w.write_row({"user_id", "ping_count", "home_bg", "home_tract", "fallback_flag"});
    auto sorted = profiles;
    std::sort(sorted.begin(), sorted.end(),
              [](const UserProfile& a, const UserProfile& b) { return a.user_id < b.user_id; });
    for (const auto& p : sorted)
        w.write_row({p.user_id, std::to_string(p.ping_count), p.home_bg, p.home_tract,
                     p.fallback_home ? "1" : "0"});
}

std::vector<UserProfile> read_profiles(const std::string& path) {
    CsvReader r(path);
    size_t user = r.require_column("user_id");
    size_t count = r.require_column("ping_count");
    size_t bg = r.require_column("home_bg");
    size_t tract = r.require_column("home_tract");
    size_t flag = r.require_column("fallback_flag");
    std::vector<UserProfile> out;
    std::vector<std::string_view> f;
    while (r.next_row(f)) {
        UserProfile p;
        p.user_id = std::string(f[user]);
        auto c = parse_i64(f[count]);
        if (!c || *c < 0)
            throw DataError(path + ": bad ping_count at line " + std::to_string(r.line_number()));
        p.ping_count = static_cast<uint64_t>(*c);
        p.home_bg = std::string(f[bg]);
        p.home_tract = std::string(f[tract]);
        p.fallback_home = f[flag] == "1";
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace mobaudit::ingest
