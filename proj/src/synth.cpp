#include "mobaudit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "mobaudit/csv.hpp"
#include "mobaudit/errors.hpp"
#include "mobaudit/geo.hpp"
#include "mobaudit/inequality.hpp"
#include "mobaudit/ingest.hpp"
#include "mobaudit/rng.hpp"

namespace mobaudit::synth {

namespace {

// Integer shares by largest remainder so they sum to total exactly; this is
// what lets fraction invariants (ethnicities and ages summing to 1) survive
// the round trip through integer ACS counts.
std::vector<int64_t> apportion(const std::vector<double>& shares, int64_t total) {
    size_t n = shares.size();
    std::vector<int64_t> counts(n);
    std::vector<std::pair<double, size_t>> remainders(n);
    int64_t assigned = 0;
    for (size_t i = 0; i < n; ++i) {
        double exact = shares[i] * double(total);
        counts[i] = int64_t(std::floor(exact));
        assigned += counts[i];
        remainders[i] = {exact - std::floor(exact), i};
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int64_t k = 0; k < total - assigned; ++k) ++counts[remainders[size_t(k)].second];
    return counts;
}

std::vector<double> dirichlet(Rng& rng, size_t n) {
    std::vector<double> draws(n);
    double total = 0;
    for (auto& d : draws) {
        d = -std::log(1.0 - rng.uniform01()); // Exp(1)
        total += d;
    }
    for (auto& d : draws) d /= total;
    return draws;
}

std::string tract_geoid(const SynthConfig& c, size_t i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%06zu", i + 1);
    return c.state_county + buf;
}

std::string format_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.7f", v);
    return buf;
}

} // namespace

double lambda_mean(const census::TractRecord& rec, const EffectSpec& effect) {
    double log_rate = effect.intercept;
    for (const auto& [name, beta] : effect.coef) {
        auto v = census::tract_field(rec, name);
        if (!v) throw DataError("tract " + rec.tract_geoid + " missing planted feature '" +
                                name + "'");
        log_rate += beta * *v;
    }
    return std::exp(log_rate);
}

SynthCity gen_city(const SynthConfig& config, uint64_t seed) {
    if (config.n_tracts == 0) throw ConfigError("n_tracts must be positive");
    if (config.p_home < 0 || config.p_home > 1)
        throw ConfigError("p_home must lie in [0,1]");
    if (config.effect.sigma < 0) throw ConfigError("noise sigma must be non-negative");
    if (config.study_days <= 0) throw ConfigError("study_days must be positive");
    if (config.users_jitter > config.users_per_tract)
        throw ConfigError("users_jitter cannot exceed users_per_tract");

    SynthCity city;
    city.config = config;
    city.seed = seed;
    size_t side = size_t(std::ceil(std::sqrt(double(config.n_tracts))));

    for (size_t i = 0; i < config.n_tracts; ++i) {
        Rng rng(derive_seed(seed, "tract", i));
        SynthTract t;
        t.population = 800 + int64_t(rng.uniform_index(3200));
        t.pop_25plus = int64_t(std::llround(rng.uniform(0.60, 0.80) * double(t.population)));

        auto ethnic = apportion(dirichlet(rng, 4), t.population); // b, w, a, other
        t.n_black = ethnic[0];
        t.n_white = ethnic[1];
        t.n_asian = ethnic[2];
        auto ages = apportion(dirichlet(rng, 4), t.population);
        for (int k = 0; k < 4; ++k) t.n_age[k] = ages[size_t(k)];

        t.n_poverty = int64_t(std::llround(rng.uniform(0.02, 0.45) * double(t.population)));
        t.n_academic = int64_t(std::llround(rng.uniform(0.10, 0.60) * double(t.pop_25plus)));
        t.n_male = int64_t(std::llround(rng.uniform(0.45, 0.55) * double(t.population)));

        // Realized record: identical arithmetic to the ACS loader (count
        // ratios), so the manifest and load_acs agree bit for bit.
        census::TractRecord& r = t.rec;
        r.tract_geoid = tract_geoid(config, i);
        r.city_id = config.city_id;
        r.population = double(t.population);
        r.pop_25plus = double(t.pop_25plus);
        double pop = double(t.population);
        r.pct_black = double(t.n_black) / pop;
        r.pct_white = double(t.n_white) / pop;
        r.pct_asian = double(t.n_asian) / pop;
        double esum = *r.pct_black + *r.pct_white + *r.pct_asian;
        r.pct_other = std::clamp(1.0 - esum, 0.0, 1.0);
        r.poverty_rate = double(t.n_poverty) / pop;
        r.pct_academic = double(t.n_academic) / double(t.pop_25plus);
        r.pct_male = double(t.n_male) / pop;
        r.age_under_25 = double(t.n_age[0]) / pop;
        r.age_25_44 = double(t.n_age[1]) / pop;
        r.age_45_64 = double(t.n_age[2]) / pop;
        r.age_65_plus = double(t.n_age[3]) / pop;

        size_t gx = i % side, gy = i / side;
        t.min_lon = config.origin_lon + double(gx) * config.tract_size_deg;
        t.min_lat = config.origin_lat + double(gy) * config.tract_size_deg;
        t.max_lon = t.min_lon + config.tract_size_deg;
        t.max_lat = t.min_lat + config.tract_size_deg;
        t.center_lon = (t.min_lon + t.max_lon) / 2;
        t.center_lat = (t.min_lat + t.max_lat) / 2;

        city.tracts.push_back(std::move(t));
    }
    return city;
}

void gen_users_and_pings(SynthCity& city, const std::string& pings_csv_path) {
    const SynthConfig& c = city.config;
    city.users.clear();

    // Per-tract user counts come from the tract stream so the user streams
    // stay purely per-user.
    std::vector<size_t> tract_users(city.tracts.size());
    size_t total_users = 0;
    for (size_t i = 0; i < city.tracts.size(); ++i) {
        size_t n = c.users_per_tract;
        if (c.users_jitter > 0) {
            Rng rng(derive_seed(city.seed, "tract-users", i));
            n += rng.uniform_index(2 * c.users_jitter + 1);
            n -= c.users_jitter;
        }
        tract_users[i] = n;
        city.tracts[i].n_users = n;
        total_users += n;
    }

    CsvWriter out(pings_csv_path);
    out.write_row({"user_id", "timestamp", "lat", "lon"});

    ingest::NightWindow night;
    std::vector<double> gravity_cdf; // rebuilt per home tract, shared by its users
    char id_buf[16];
    size_t user_index = 0;
    std::vector<std::string> row(4);

    for (size_t ti = 0; ti < city.tracts.size(); ++ti) {
        const SynthTract& home = city.tracts[ti];

        // Destination mass ~ population / (distance + floor)^gamma.
        gravity_cdf.resize(city.tracts.size());
        double acc = 0;
        for (size_t j = 0; j < city.tracts.size(); ++j) {
            const SynthTract& dst = city.tracts[j];
            double d_km = geo::haversine_m(home.center_lat, home.center_lon, dst.center_lat,
                                           dst.center_lon) /
                          1000.0;
            acc += double(dst.population) /
                   std::pow(d_km + c.gravity_floor_km, c.gravity_exponent);
            gravity_cdf[j] = acc;
        }
        for (auto& v : gravity_cdf) v /= acc;

        for (size_t k = 0; k < tract_users[ti]; ++k, ++user_index) {
            Rng rng(derive_seed(city.seed, "user", user_index));
            SynthUser u;
            std::snprintf(id_buf, sizeof id_buf, "u%08zu", user_index);
            u.user_id = id_buf;
            u.home_tract = ti;
            double eps = c.effect.sigma > 0 ? rng.normal(0, c.effect.sigma) : 0.0;
            u.lambda_daily = lambda_mean(home.rec, c.effect) * std::exp(eps);

            // Fixed home anchor, inset from the tract edge so coordinate
            // rounding can never push it into a neighbour.
            auto inset = [&](double lo, double hi, double frac) {
                return lo + (0.01 + 0.98 * frac) * (hi - lo);
            };
            u.home_lon = inset(home.min_lon, home.max_lon, rng.uniform01());
            u.home_lat = inset(home.min_lat, home.max_lat, rng.uniform01());

            row[0] = u.user_id;
            for (int day = 0; day < c.study_days; ++day) {
                uint64_t n_pings = rng.poisson(u.lambda_daily);
                for (uint64_t p = 0; p < n_pings; ++p) {
                    int64_t ts = c.start_ts + int64_t(day) * 86400 +
                                 int64_t(rng.uniform01() * 86400.0);
                    double lon, lat;
                    if (ingest::is_night(ts, c.tz_offset_hours, night) &&
                        rng.uniform01() < c.p_home) {
                        lon = u.home_lon;
                        lat = u.home_lat;
                    } else {
                        const SynthTract& dst = city.tracts[rng.sample_cdf(gravity_cdf)];
                        lon = inset(dst.min_lon, dst.max_lon, rng.uniform01());
                        lat = inset(dst.min_lat, dst.max_lat, rng.uniform01());
                    }
                    row[1] = std::to_string(ts);
                    row[2] = format_coord(lat);
                    row[3] = format_coord(lon);
                    out.write_row(row);
                    ++u.realized_pings;
                }
            }
            city.users.push_back(std::move(u));
        }
    }
    out.flush();

    std::vector<double> lambdas;
    lambdas.reserve(city.users.size());
    for (const auto& u : city.users) lambdas.push_back(u.lambda_daily);
    city.true_gini_lambda = ineq::gini(lambdas);
}

void write_boundaries(const SynthCity& city, const std::string& geojson_path) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& t : city.tracts) {
        nlohmann::json ring = nlohmann::json::array();
        ring.push_back({t.min_lon, t.min_lat});
        ring.push_back({t.max_lon, t.min_lat});
        ring.push_back({t.max_lon, t.max_lat});
        ring.push_back({t.min_lon, t.max_lat});
        ring.push_back({t.min_lon, t.min_lat});
        // Boundaries are block groups, as in the real pipeline; each synthetic
        // tract is one block group ("<tract>1") covering the whole square.
        features.push_back({{"type", "Feature"},
                            {"properties", {{"GEOID", t.rec.tract_geoid + "1"}}},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", {ring}}}}});
    }
    nlohmann::json doc{{"type", "FeatureCollection"}, {"features", features}};
    std::ofstream out(geojson_path);
    if (!out) throw IoError("cannot write " + geojson_path);
    out << doc.dump() << "\n";
}

std::map<std::string, std::string> write_acs_tables(const SynthCity& city,
                                                    const std::string& dir) {
    auto geo_id = [](const census::TractRecord& r) { return "1400000US" + r.tract_geoid; };
    auto name = [](const census::TractRecord& r) {
        return "Census Tract " + r.tract_geoid.substr(5);
    };
    auto n = [](int64_t v) { return std::to_string(v); };

    std::map<std::string, std::string> paths;
    {
        CsvWriter w(dir + "/S0101.csv");
        w.write_row({"GEO_ID", "NAME", "S0101_C01_001E", "S0101_C03_001E", "AGE_UNDER_25",
                     "AGE_25_44", "AGE_45_64", "AGE_65_PLUS"});
        for (const auto& t : city.tracts)
            w.write_row({geo_id(t.rec), name(t.rec), n(t.population), n(t.n_male),
                         n(t.n_age[0]), n(t.n_age[1]), n(t.n_age[2]), n(t.n_age[3])});
        paths["S0101"] = dir + "/S0101.csv";
    }
    {
        CsvWriter w(dir + "/S1501.csv");
        w.write_row({"GEO_ID", "NAME", "S1501_C01_006E", "S1501_C01_015E"});
        for (const auto& t : city.tracts)
            w.write_row({geo_id(t.rec), name(t.rec), n(t.pop_25plus), n(t.n_academic)});
        paths["S1501"] = dir + "/S1501.csv";
    }
    {
        CsvWriter w(dir + "/S1701.csv");
        w.write_row({"GEO_ID", "NAME", "S1701_C01_001E", "S1701_C02_001E"});
        for (const auto& t : city.tracts)
            w.write_row({geo_id(t.rec), name(t.rec), n(t.population), n(t.n_poverty)});
        paths["S1701"] = dir + "/S1701.csv";
    }
    {
        CsvWriter w(dir + "/B02001.csv");
        w.write_row({"GEO_ID", "NAME", "B02001_001E", "B02001_002E", "B02001_003E",
                     "B02001_005E"});
        for (const auto& t : city.tracts)
            w.write_row({geo_id(t.rec), name(t.rec), n(t.population), n(t.n_white),
                         n(t.n_black), n(t.n_asian)});
        paths["B02001"] = dir + "/B02001.csv";
    }
    return paths;
}

void write_manifest(const SynthCity& city, const std::string& path) {
    const SynthConfig& c = city.config;
    nlohmann::json coef = nlohmann::json::object();
    for (const auto& [name, beta] : c.effect.coef) coef[name] = beta;

    std::vector<std::vector<double>> tract_lambdas(city.tracts.size());
    for (const auto& u : city.users) tract_lambdas[u.home_tract].push_back(u.lambda_daily);

    nlohmann::json tracts = nlohmann::json::array();
    for (size_t ti = 0; ti < city.tracts.size(); ++ti) {
        const SynthTract& t = city.tracts[ti];
        // True median daily rate over this tract's users.
        std::vector<double>& lambdas = tract_lambdas[ti];
        nlohmann::json jt{
            {"geoid", t.rec.tract_geoid},
            {"population", t.population},
            {"n_users", t.n_users},
            {"lambda_mean_eps0", lambda_mean(t.rec, c.effect)},
        };
        for (const auto& f : census::default_feature_spec())
            jt[f] = *census::tract_field(t.rec, f);
        if (!lambdas.empty()) {
            std::sort(lambdas.begin(), lambdas.end());
            size_t m = lambdas.size();
            jt["true_median_lambda"] =
                m % 2 ? lambdas[m / 2] : (lambdas[m / 2 - 1] + lambdas[m / 2]) / 2;
        }
        tracts.push_back(std::move(jt));
    }

    nlohmann::json users = nlohmann::json::array();
    for (const auto& u : city.users)
        users.push_back({{"user_id", u.user_id},
                         {"home_tract", city.tracts[u.home_tract].rec.tract_geoid},
                         {"home_bg", city.tracts[u.home_tract].rec.tract_geoid + "1"},
                         {"lambda_daily", u.lambda_daily},
                         {"realized_pings", u.realized_pings}});

    nlohmann::json doc{
        {"city_id", c.city_id},
        {"seed", city.seed},
        {"n_tracts", c.n_tracts},
        {"users_per_tract", c.users_per_tract},
        {"study_days", c.study_days},
        {"p_home", c.p_home},
        {"gravity_exponent", c.gravity_exponent},
        {"gravity_floor_km", c.gravity_floor_km},
        {"intercept", c.effect.intercept},
        {"noise_sigma", c.effect.sigma},
        {"coefficients", coef},
        {"true_gini_lambda", city.true_gini_lambda},
        {"tracts", tracts},
        {"users", users},
    };
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << doc.dump(2) << "\n";
}

Fixture emit_fixture(const SynthConfig& config, uint64_t seed, const std::string& dir) {
    std::filesystem::create_directories(dir + "/acs");
    SynthCity city = gen_city(config, seed);
    Fixture fx;
    fx.pings = dir + "/pings.csv";
    fx.boundaries = dir + "/boundaries.geojson";
    fx.manifest = dir + "/manifest.json";
    gen_users_and_pings(city, fx.pings);
    write_boundaries(city, fx.boundaries);
    fx.acs_tables = write_acs_tables(city, dir + "/acs");
    write_manifest(city, fx.manifest);
    return fx;
}

} // namespace mobaudit::synth
