#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>

#include "mobaudit/errors.hpp"
#include "mobaudit/geo.hpp"
#include "mobaudit/ingest.hpp"

using namespace mobaudit;
using ingest::NightWindow;
using ingest::PingSchema;

namespace {

// 2019-04-01 00:00:00 UTC; all test timestamps offset from here.
constexpr int64_t kBase = 1554076800;

int64_t at_local_hour(int hour, double tz_offset_hours, int day = 0) {
    return kBase + day * 86400 + hour * 3600 - std::llround(tz_offset_hours * 3600.0);
}

// Four unit-square block groups: two in tract ...1100, two in tract ...1200.
geo::RegionIndex test_index() {
    auto sq = [](const std::string& geoid, double x0, double y0) {
        geo::Region r;
        r.geoid = geoid;
        r.rings.push_back(
            geo::Ring{{x0, x0 + 1, x0 + 1, x0, x0}, {y0, y0, y0 + 1, y0 + 1, y0}});
        return r;
    };
    return geo::RegionIndex::build({
        sq("360470011001", 0, 0),
        sq("360470011002", 1, 0),
        sq("360470012001", 0, 1),
        sq("360470012002", 1, 1),
    });
}

struct PingFile {
    std::string path = "/tmp/mobaudit_test_pings.csv";
    std::ofstream out;
    PingFile() : out(path) { out << "user_id,timestamp,lat,lon\n"; }
    void ping(const std::string& user, int64_t ts, double lat, double lon) {
        out << user << "," << ts << "," << lat << "," << lon << "\n";
    }
    void raw(const std::string& line) { out << line << "\n"; }
    void close() { out.close(); }
    ~PingFile() { std::remove(path.c_str()); }
};

} // namespace

TEST_CASE("is_night: window edges and timezone offset") {
    NightWindow w; // 22..06
    CHECK(ingest::is_night(at_local_hour(22, 0), 0, w));
    CHECK(ingest::is_night(at_local_hour(23, 0), 0, w));
    CHECK(ingest::is_night(at_local_hour(0, 0), 0, w));
    CHECK(ingest::is_night(at_local_hour(5, 0), 0, w));
    CHECK_FALSE(ingest::is_night(at_local_hour(6, 0), 0, w));
    CHECK_FALSE(ingest::is_night(at_local_hour(12, 0), 0, w));
    CHECK_FALSE(ingest::is_night(at_local_hour(21, 0), 0, w));

    // Same local hours under a New-York-like offset.
    CHECK(ingest::is_night(at_local_hour(23, -5), -5, w));
    CHECK_FALSE(ingest::is_night(at_local_hour(12, -5), -5, w));

    // Non-wrapping window.
    NightWindow day{9, 17};
    CHECK(ingest::is_night(at_local_hour(9, 0), 0, day));
    CHECK_FALSE(ingest::is_night(at_local_hour(17, 0), 0, day));
    CHECK_FALSE(ingest::is_night(at_local_hour(3, 0), 0, day));
}

TEST_CASE("ping reader: parses well-formed rows, counts malformed ones") {
    PingFile f;
    f.ping("u1", 1554076800, 40.71, -74.00);
    f.raw("u2,notatime,40.0,-74.0");
    f.raw("u3,1554076801,95.0,-74.0");  // latitude out of range
    f.raw(",1554076802,40.0,-74.0");    // empty user
    f.raw("u4,1554076803,40.0");        // missing column
    f.ping("u5", 1554076804, -40.5, 150.25);
    f.close();

    ingest::PingReader reader(f.path, PingSchema{});
    int parsed = 0;
    while (auto p = reader.next()) {
        ++parsed;
        if (parsed == 1) {
            CHECK(p->user_id == "u1");
            CHECK(p->timestamp == 1554076800);
            CHECK(p->lat == 40.71);
            CHECK(p->lon == -74.00);
        }
    }
    CHECK(parsed == 2);
    CHECK(reader.rows_read() == 6);
    CHECK(reader.malformed() == 4);
}

TEST_CASE("ping reader: missing required column is a config error") {
    PingFile f;
    f.close();
    PingSchema schema;
    schema.ts_col = "epoch";
    CHECK_THROWS_AS(ingest::PingReader(f.path, schema), ConfigError);
}

TEST_CASE("ingest: home from most frequent night block group") {
    auto idx = test_index();
    PingFile f;
    // u1: 3 night pings in BG ...1001, 1 night ping in BG ...1002, plus
    // daytime pings elsewhere; home must be ...1001.
    for (int d = 0; d < 3; ++d) f.ping("u1", at_local_hour(23, 0, d), 0.5, 0.5);
    f.ping("u1", at_local_hour(2, 0, 3), 0.5, 1.5);
    f.ping("u1", at_local_hour(12, 0, 0), 1.5, 1.5);
    f.ping("u1", at_local_hour(13, 0, 0), 1.5, 1.5);

    // u2: no night pings at all; all-ping fallback should pick BG ...2002.
    for (int d = 0; d < 4; ++d) f.ping("u2", at_local_hour(10, 0, d), 1.5, 1.5);
    f.ping("u2", at_local_hour(11, 0, 0), 0.5, 0.5);

    // u3: tie, 2 night pings in each of two block groups -> smallest GEOID.
    f.ping("u3", at_local_hour(23, 0, 0), 1.5, 0.5);
    f.ping("u3", at_local_hour(23, 0, 1), 1.5, 0.5);
    f.ping("u3", at_local_hour(1, 0, 2), 0.5, 0.5);
    f.ping("u3", at_local_hour(1, 0, 3), 0.5, 0.5);

    // u4: everything outside the mapped area -> no home.
    f.ping("u4", at_local_hour(23, 0, 0), 40.0, -74.0);
    f.ping("u4", at_local_hour(12, 0, 1), 41.0, -75.0);
    f.close();

    auto res = ingest::ingest_pings(f.path, PingSchema{}, idx, NightWindow{}, 0.0);
    REQUIRE(res.profiles.size() == 4);
    const auto& u1 = res.profiles[0];
    CHECK(u1.user_id == "u1");
    CHECK(u1.ping_count == 6);
    CHECK(u1.night_ping_count == 4);
    CHECK(u1.home_bg == "360470011001");
    CHECK(u1.home_tract == "36047001100");
    CHECK_FALSE(u1.fallback_home);

    const auto& u2 = res.profiles[1];
    CHECK(u2.home_bg == "360470012002");
    CHECK(u2.home_tract == "36047001200");
    CHECK(u2.fallback_home);

    const auto& u3 = res.profiles[2];
    CHECK(u3.home_bg == "360470011001");

    const auto& u4 = res.profiles[3];
    CHECK(u4.home_bg.empty());
    CHECK(u4.home_tract.empty());
    CHECK(res.stats.fallback_users == 1);
}

TEST_CASE("ingest: study window drops out-of-range pings") {
    auto idx = test_index();
    PingFile f;
    f.ping("u1", kBase - 10, 0.5, 0.5);
    f.ping("u1", kBase + 100, 0.5, 0.5);
    f.ping("u1", kBase + 200, 0.5, 0.5);
    f.ping("u1", kBase + 86400 * 40, 0.5, 0.5);
    f.close();
    ingest::StudyWindow w{kBase, kBase + 86400 * 30};
    auto res = ingest::ingest_pings(f.path, PingSchema{}, idx, NightWindow{}, 0.0, w);
    REQUIRE(res.profiles.size() == 1);
    CHECK(res.profiles[0].ping_count == 2);
    CHECK(res.stats.outside_window == 2);
}

TEST_CASE("ingest: home inference is ping-order invariant") {
    auto idx = test_index();
    std::vector<std::string> lines;
    for (int d = 0; d < 5; ++d)
        lines.push_back("u1," + std::to_string(at_local_hour(23, 0, d)) + ",0.5,0.5");
    for (int d = 0; d < 3; ++d)
        lines.push_back("u1," + std::to_string(at_local_hour(2, 0, d)) + ",1.5,0.5");

    auto run = [&](const std::vector<std::string>& ordered) {
        PingFile f;
        for (const auto& l : ordered) f.raw(l);
        f.close();
        return ingest::ingest_pings(f.path, PingSchema{}, idx, NightWindow{}, 0.0);
    };
    auto a = run(lines);
    std::reverse(lines.begin(), lines.end());
    auto b = run(lines);
    CHECK(a.profiles[0].home_bg == b.profiles[0].home_bg);
    CHECK(a.profiles[0].ping_count == b.profiles[0].ping_count);
    CHECK(a.profiles[0].night_ping_count == b.profiles[0].night_ping_count);
}

TEST_CASE("filter_users: strict bounds and tally buckets") {
    census::TractRecord ok;
    ok.tract_geoid = "36047001100";
    ok.population = 600;
    census::TractRecord low;
    low.tract_geoid = "36047001200";
    low.population = 400;
    std::map<std::string, census::TractRecord> tracts{{ok.tract_geoid, ok},
                                                      {low.tract_geoid, low}};

    auto mk = [](const std::string& id, uint64_t count, const std::string& tract) {
        ingest::UserProfile p;
        p.user_id = id;
        p.ping_count = count;
        if (!tract.empty()) {
            p.home_tract = tract;
            p.home_bg = tract + "1";
        }
        return p;
    };

    std::vector<ingest::UserProfile> profiles{
        mk("a_lower_bound", 30, "36047001100"),   // excluded: count == 30
        mk("b_kept_31", 31, "36047001100"),       // kept
        mk("c_kept_99999", 99999, "36047001100"), // kept
        mk("d_upper_bound", 100000, "36047001100"), // excluded: count == 100000
        mk("e_no_home", 500, ""),                  // excluded: no home
        mk("f_unknown_tract", 500, "99999999999"), // excluded: not in ACS
        mk("g_low_pop", 500, "36047001200"),       // excluded: population < 500
        mk("h_both", 29, ""), // count bucket wins over missing home
    };

    auto [kept, tally] = ingest::filter_users(profiles, tracts);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].user_id == "b_kept_31");
    CHECK(kept[1].user_id == "c_kept_99999");
    CHECK(tally.count_out_of_bounds == 3);
    CHECK(tally.no_home == 1);
    CHECK(tally.no_acs_tract == 1);
    CHECK(tally.low_population == 1);
    CHECK(tally.total_excluded() + kept.size() == profiles.size());
}

TEST_CASE("profiles: write/read round trip") {
    ingest::UserProfile a;
    a.user_id = "u9";
    a.ping_count = 123;
    a.night_ping_count = 11;
    a.home_bg = "360470011001";
    a.home_tract = "36047001100";
    ingest::UserProfile b;
    b.user_id = "u1";
    b.ping_count = 50;
    b.fallback_home = true;

    std::string path = "/tmp/mobaudit_test_profiles.csv";
    ingest::write_profiles(path, {a, b});
    auto back = ingest::read_profiles(path);
    REQUIRE(back.size() == 2);
    // Sorted by user id on write.
    CHECK(back[0].user_id == "u1");
    CHECK(back[0].fallback_home);
    CHECK(back[1].user_id == "u9");
    CHECK(back[1].ping_count == 123);
    CHECK(back[1].home_bg == "360470011001");
    CHECK(back[1].home_tract == "36047001100");
    std::remove(path.c_str());
}
