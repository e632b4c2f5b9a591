#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mobaudit/census.hpp"

namespace mobaudit::synth {

// Log-linear planted effect: a user homed in tract t produces
// lambda = exp(intercept + sum_f coef[f] * feature_f(t) + eps) pings per day,
// eps ~ Normal(0, sigma) drawn once per user.
struct EffectSpec {
    double intercept = 1.6;
    std::map<std::string, double> coef; // feature name -> coefficient
    double sigma = 0.25;
};

struct SynthConfig {
    std::string city_id = "synthville";
    size_t n_tracts = 100;
    size_t users_per_tract = 20;
    size_t users_jitter = 0; // tract user count varies uniformly by +/- this
    int study_days = 14;
    double p_home = 0.7;         // night pings anchor at home with this probability
    double gravity_exponent = 2.0;
    double gravity_floor_km = 1.0; // softens the distance kernel at zero
    EffectSpec effect;
    int64_t start_ts = 1709251200; // 2024-03-01T00:00:00Z
    double tz_offset_hours = 0;
    // Grid geometry: square tracts laid out row-major from this corner.
    std::string state_county = "36900"; // synthetic state+county GEOID prefix
    double origin_lon = -75.2;
    double origin_lat = 41.3;
    double tract_size_deg = 0.01;
};

struct SynthTract {
    census::TractRecord rec; // realized values, exactly what load_acs will see
    double min_lon = 0, min_lat = 0, max_lon = 0, max_lat = 0;
    double center_lon = 0, center_lat = 0;
    // Integer counts behind rec, emitted verbatim into the ACS tables.
    int64_t population = 0, pop_25plus = 0;
    int64_t n_black = 0, n_white = 0, n_asian = 0;
    int64_t n_poverty = 0, n_academic = 0, n_male = 0;
    int64_t n_age[4] = {0, 0, 0, 0};
    size_t n_users = 0;
};

struct SynthUser {
    std::string user_id;
    size_t home_tract = 0; // index into tracts
    double lambda_daily = 0;
    double home_lon = 0, home_lat = 0;
    uint64_t realized_pings = 0;
};

struct SynthCity {
    SynthConfig config;
    uint64_t seed = 0;
    std::vector<SynthTract> tracts;
    std::vector<SynthUser> users;      // filled by gen_users_and_pings
    double true_gini_lambda = 0;       // over per-user lambda, ditto
};

// Expected daily rate for a tract's features with eps = 0; the monotone core
// of the planted effect.
double lambda_mean(const census::TractRecord& rec, const EffectSpec& effect);

// Demographics + geometry only. Deterministic in (config, seed).
SynthCity gen_city(const SynthConfig& config, uint64_t seed);

// Draws every user and streams their pings (user_id,timestamp,lat,lon) to
// pings_csv_path sorted by user then time. Fills city.users and the true
// Gini. Deterministic in (config, seed) regardless of call order.
void gen_users_and_pings(SynthCity& city, const std::string& pings_csv_path);

void write_boundaries(const SynthCity& city, const std::string& geojson_path);

// One CSV per ACS table (S0101, S1501, S1701, B02001) with GEO_ID rows in
// the published "1400000US<geoid>" style. Returns table name -> path.
std::map<std::string, std::string> write_acs_tables(const SynthCity& city,
                                                    const std::string& dir);

void write_manifest(const SynthCity& city, const std::string& path);

struct Fixture {
    std::string pings;
    std::string boundaries;
    std::string manifest;
    std::map<std::string, std::string> acs_tables;
};

// Generates everything under dir: pings.csv, boundaries.geojson, manifest.json
// and acs/<table>.csv. dir must already exist.
Fixture emit_fixture(const SynthConfig& config, uint64_t seed, const std::string& dir);

} // namespace mobaudit::synth
