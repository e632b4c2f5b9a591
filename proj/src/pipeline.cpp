#include "mobaudit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "mobaudit/acs_fetch.hpp"
#include "mobaudit/census.hpp"
#include "mobaudit/errors.hpp"
#include "mobaudit/geo.hpp"
#include "mobaudit/inequality.hpp"
#include "mobaudit/ingest.hpp"
#include "mobaudit/jsonschema.hpp"
#include "mobaudit/model.hpp"
#include "mobaudit/networks.hpp"
#include "mobaudit/shap.hpp"
#include "mobaudit/svg.hpp"
#include "mobaudit/synth.hpp"

namespace mobaudit::pipeline {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for '" + path + "'");
}

void write_json_file(const std::string& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

json read_json_file(const std::string& path, const char* producer) {
    std::ifstream in(path);
    if (!in)
        throw DependencyError("missing artifact '" + path + "' (run the " +
                              std::string(producer) + " stage first)");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw DataError("artifact '" + path + "' is not valid JSON: " + e.what());
    }
    return j;
}

void require_artifact(const std::string& path, const char* producer) {
    if (!fs::exists(path))
        throw DependencyError("missing artifact '" + path + "' (run the " +
                              std::string(producer) + " stage first)");
}

const std::map<std::string, config::CityConfig>& require_cities(const config::AuditConfig& cfg) {
    if (cfg.cities.empty()) throw ConfigError("config defines no [city.<name>] sections");
    return cfg.cities;
}

std::vector<std::string> feature_spec(const config::AuditConfig& cfg) {
    return cfg.features.empty() ? census::default_feature_spec() : cfg.features;
}

std::string group_label(size_t g) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "q%02zu", g);
    return buf;
}

geo::RegionIndex load_index(const config::CityConfig& city) {
    return geo::RegionIndex::build(geo::load_geojson(city.boundaries_path));
}

// ACS join plus the population/completeness tract filter, with the counts the
// audit artifacts report.
struct CityTracts {
    std::map<std::string, census::TractRecord> joined; // every joined record
    std::map<std::string, census::TractRecord> kept;   // filter_tracts survivors
    census::TractFilterTally tally;
    size_t missing_any_table = 0; // tract-table pairs dropped by the join
};

CityTracts load_city_tracts(const config::AuditConfig& cfg, const config::CityConfig& city) {
    std::vector<std::string> missing;
    auto records = census::load_acs(city.acs_tables, census::AcsSchema::defaults(),
                                    city.name, &missing);
    CityTracts out;
    out.missing_any_table = missing.size();
    auto [kept, tally] = census::filter_tracts(records, cfg.min_tract_population);
    out.joined = census::by_tract(records);
    out.kept = census::by_tract(kept);
    out.tally = tally;
    return out;
}

json hp_json(const model::Hyperparams& hp) {
    return json{{"n_trees", hp.n_trees},
                {"max_depth", hp.max_depth},
                {"min_leaf", hp.min_leaf},
                {"feature_subset", hp.feature_subset}};
}

// Shared by the ingest stage and audit's auto-ingest.
void ingest_city(const config::AuditConfig& cfg, const config::CityConfig& city,
                 const std::string& dir) {
    auto index = load_index(city);
    ingest::StudyWindow window{cfg.study_start, cfg.study_end};
    auto res = ingest::ingest_pings(city.pings_path, ingest::PingSchema{}, index, cfg.night,
                                    city.tz_offset_hours, window);
    ingest::write_profiles(dir + "/profiles.csv", res.profiles);
    json stats = {
        {"rows", res.stats.rows},
        {"malformed", res.stats.malformed},
        {"outside_window", res.stats.outside_window},
        {"outside_regions", res.stats.outside_regions},
        {"assigned", res.stats.assigned},
        {"fallback_users", res.stats.fallback_users},
        {"users", res.profiles.size()},
    };
    write_json_file(dir + "/ingest_stats.json", stats);
}

} // namespace

std::string Runner::stage_dir(const std::string& city, const std::string& stage) const {
    fs::path dir = fs::path(cfg.output_dir) / city / stage;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    return dir.string();
}

void Runner::synth() {
    if (!cfg.synth) throw ConfigError("config has no [synth] section");
    auto t0 = Clock::now();
    fs::path dir = fs::path(cfg.output_dir) / "fixture" / cfg.synth->city_id;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    synth::emit_fixture(*cfg.synth, cfg.seed, dir.string());
    timings.push_back({"synth", cfg.synth->city_id, elapsed_s(t0)});
}

void Runner::fetch() {
    if (!cfg.fetch) throw ConfigError("config has no [fetch] section");
    auto t0 = Clock::now();
    census::fetch_acs(*cfg.fetch);
    timings.push_back({"fetch", "", elapsed_s(t0)});
}

void Runner::ingest() {
    for (const auto& [name, city] : require_cities(cfg)) {
        auto t0 = Clock::now();
        ingest_city(cfg, city, stage_dir(name, "ingest"));
        timings.push_back({"ingest", name, elapsed_s(t0)});
    }
}

void Runner::audit() {
    for (const auto& [name, city] : require_cities(cfg)) {
        auto t0 = Clock::now();
        std::string ingest_dir = stage_dir(name, "ingest");
        if (!fs::exists(ingest_dir + "/profiles.csv")) {
            ingest_city(cfg, city, ingest_dir);
            timings.push_back({"ingest", name, elapsed_s(t0)});
            t0 = Clock::now();
        }
        auto profiles = ingest::read_profiles(ingest_dir + "/profiles.csv");
        auto tracts = load_city_tracts(cfg, city);

        // Population is checked against every joined tract here; tracts with
        // incomplete demographics only matter once modeling starts.
        auto [kept, tally] = ingest::filter_users(profiles, tracts.joined, cfg.min_pings,
                                                  cfg.max_pings, cfg.min_tract_population);
        std::string dir = stage_dir(name, "audit");
        ingest::write_profiles(dir + "/filtered_profiles.csv", kept);
        write_json_file(dir + "/filter_tally.json",
                        json{{"users_before", profiles.size()},
                             {"users_after", kept.size()},
                             {"excluded",
                              {{"count_out_of_bounds", tally.count_out_of_bounds},
                               {"no_home", tally.no_home},
                               {"no_acs_tract", tally.no_acs_tract},
                               {"low_population", tally.low_population}}},
                             {"tracts",
                              {{"joined", tracts.joined.size()},
                               {"kept", tracts.kept.size()},
                               {"low_population", tracts.tally.low_population},
                               {"missing_fields", tracts.tally.missing_fields},
                               {"missing_any_table", tracts.missing_any_table}}}});

        std::vector<double> counts;
        counts.reserve(kept.size());
        for (const auto& p : kept) counts.push_back(double(p.ping_count));
        double g = ineq::gini(counts); // empty cohort -> UndefinedStatistic, surfaced as-is
        double share = ineq::top_share(counts, cfg.top_share_fraction);
        std::vector<double> grid;
        for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
        auto curve = ineq::lorenz(counts, grid);
        json lorenz = json::array();
        for (const auto& [p, l] : curve) lorenz.push_back(json::array({p, l}));
        write_json_file(dir + "/inequality.json",
                        json{{"n_users", kept.size()},
                             {"gini", g},
                             {"top_share_fraction", cfg.top_share_fraction},
                             {"top_share", share},
                             {"lorenz", lorenz}});
        if (plots) write_text(dir + "/lorenz.svg", svg::lorenz_svg(curve, g));
        timings.push_back({"audit", name, elapsed_s(t0)});
    }
}

void Runner::networks() {
    for (const auto& [name, city] : require_cities(cfg)) {
        auto t0 = Clock::now();
        std::string filtered_path = stage_dir(name, "audit") + "/filtered_profiles.csv";
        require_artifact(filtered_path, "audit");
        auto profiles = ingest::read_profiles(filtered_path);
        auto group_of = networks::partition_groups(profiles, int(cfg.n_groups));
        auto index = load_index(city);

        // Second pass over the raw pings, keeping only retained users inside
        // the study window; everything fits in memory at audit scale.
        std::map<std::string, std::vector<networks::TimedPoint>> by_user;
        for (const auto& p : profiles) by_user[p.user_id]; // fix iteration order
        {
            ingest::PingReader reader(city.pings_path, ingest::PingSchema{});
            while (auto ping = reader.next()) {
                auto it = by_user.find(ping->user_id);
                if (it == by_user.end()) continue;
                if (cfg.study_start && ping->timestamp < *cfg.study_start) continue;
                if (cfg.study_end && ping->timestamp >= *cfg.study_end) continue;
                it->second.push_back({ping->timestamp, ping->lat, ping->lon});
            }
        }
        std::vector<networks::Trip> trips;
        for (auto& [uid, pts] : by_user) {
            std::sort(pts.begin(), pts.end(),
                      [](const networks::TimedPoint& a, const networks::TimedPoint& b) {
                          return std::tie(a.ts, a.lat, a.lon) < std::tie(b.ts, b.lat, b.lon);
                      });
            auto stays = networks::detect_stays(uid, pts, index, cfg.stay_radius_m,
                                                int64_t(cfg.stay_dwell_s));
            auto user_trips = networks::extract_trips(stays);
            trips.insert(trips.end(), user_trips.begin(), user_trips.end());
        }
        if (cfg.drop_self_loops)
            std::erase_if(trips, [](const networks::Trip& t) {
                return t.origin == t.destination;
            });

        std::set<std::string> everyone;
        std::vector<std::set<std::string>> members(cfg.n_groups);
        for (const auto& [uid, g] : group_of) {
            everyone.insert(uid);
            members[size_t(g) - 1].insert(uid);
        }

        std::string dir = stage_dir(name, "networks");
        auto all_net = networks::build_network(trips, everyone, "all");
        networks::write_edges(dir + "/edges_all.csv", all_net);
        auto all_backbone = networks::nc_backbone(
            networks::filter_min_weight(all_net, cfg.min_edge_weight), cfg.backbone_delta);
        networks::write_edges(dir + "/backbone_all.csv", all_backbone);

        std::vector<std::string> universe;
        for (uint32_t s = 0; s < index.size(); ++s) universe.push_back(index.tract(s));
        std::sort(universe.begin(), universe.end());
        universe.erase(std::unique(universe.begin(), universe.end()), universe.end());

        std::vector<networks::MobilityNetwork> raw(cfg.n_groups), backbone(cfg.n_groups);
        uint64_t group_weight_sum = 0;
        for (size_t g = 0; g < cfg.n_groups; ++g) {
            std::string label = group_label(g + 1);
            raw[g] = networks::build_network(trips, members[g], label);
            networks::write_edges(dir + "/edges_" + label + ".csv", raw[g]);
            group_weight_sum += raw[g].total_weight();
            backbone[g] = networks::nc_backbone(
                networks::filter_min_weight(raw[g], cfg.min_edge_weight), cfg.backbone_delta);
            networks::write_edges(dir + "/backbone_" + label + ".csv", backbone[g]);
        }

        // Fig-1c/1d-style comparisons: every group's backbone against the top
        // producers' backbone. Degenerate inputs (an empty backbone has zero
        // degree variance) record null rather than a made-up number.
        json groups = json::array();
        std::string correlations = "metric";
        for (size_t g = 0; g < cfg.n_groups; ++g) correlations += "," + group_label(g + 1);
        std::string degree_row = "degree_vs_q1", weight_row = "edge_weight_vs_q1";
        for (size_t g = 0; g < cfg.n_groups; ++g) {
            json entry = {{"group", group_label(g + 1)},
                          {"users", members[g].size()},
                          {"weight", raw[g].total_weight()},
                          {"raw_edges", raw[g].edges.size()},
                          {"backbone_edges", backbone[g].edges.size()}};
            try {
                double r = networks::degree_correlation(backbone[g], backbone[0], universe);
                entry["degree_correlation_vs_q1"] = r;
                degree_row += "," + g17(r);
            } catch (const UndefinedStatistic&) {
                entry["degree_correlation_vs_q1"] = nullptr;
                degree_row += ",";
            }
            try {
                double r = networks::edge_weight_correlation(backbone[g], backbone[0]);
                entry["edge_weight_correlation_vs_q1"] = r;
                weight_row += "," + g17(r);
            } catch (const UndefinedStatistic&) {
                entry["edge_weight_correlation_vs_q1"] = nullptr;
                weight_row += ",";
            }
            groups.push_back(std::move(entry));
        }
        write_text(dir + "/correlations.csv",
                   correlations + "\n" + degree_row + "\n" + weight_row + "\n");

        write_json_file(
            dir + "/network_summary.json",
            json{{"stay_radius_m", cfg.stay_radius_m},
                 {"stay_dwell_s", cfg.stay_dwell_s},
                 {"min_edge_weight", cfg.min_edge_weight},
                 {"backbone_delta", cfg.backbone_delta},
                 {"drop_self_loops", cfg.drop_self_loops},
                 {"n_groups", cfg.n_groups},
                 {"all",
                  {{"users", everyone.size()},
                   {"weight", all_net.total_weight()},
                   {"raw_edges", all_net.edges.size()},
                   {"backbone_edges", all_backbone.edges.size()}}},
                 {"groups", groups},
                 {"group_weight_sum", group_weight_sum},
                 {"conservation_exact", group_weight_sum == all_net.total_weight()}});
        timings.push_back({"networks", name, elapsed_s(t0)});
    }
}

void Runner::model() {
    require_cities(cfg);
    auto t0 = Clock::now();
    auto spec = feature_spec(cfg);

    std::map<std::string, std::vector<model::TractSample>> by_city;
    std::map<std::string, model::MedianTally> tallies;
    for (const auto& [name, city] : cfg.cities) {
        std::string filtered_path = stage_dir(name, "audit") + "/filtered_profiles.csv";
        require_artifact(filtered_path, "audit");
        auto profiles = ingest::read_profiles(filtered_path);
        auto tracts = load_city_tracts(cfg, city);
        model::MedianTally tally;
        auto samples = model::median_production(profiles, tracts.kept, spec, name,
                                                cfg.min_users_per_tract, &tally);
        if (samples.empty())
            throw DataError("city '" + name + "' yields no modelable tract samples");

        CsvWriter w(stage_dir(name, "model") + "/samples.csv");
        std::vector<std::string> header = {"tract_geoid", "city", "target"};
        header.insert(header.end(), spec.begin(), spec.end());
        w.write_row(header);
        for (const auto& s : samples) {
            std::vector<std::string> row = {s.tract_geoid, s.city_id, g17(s.target)};
            for (double f : s.features) row.push_back(g17(f));
            w.write_row(row);
        }
        by_city.emplace(name, std::move(samples));
        tallies.emplace(name, tally);
    }

    auto grid = config::build_grid(cfg, spec.size());
    std::map<std::string, model::ForestModel> finals;
    auto matrix = model::city_matrix(by_city, grid, int(cfg.outer_folds),
                                     int(cfg.inner_folds), cfg.seed, &finals);

    for (const auto& name : matrix.cities) {
        const auto& rep = matrix.diagonal_cv.at(name);
        json folds = json::array();
        for (const auto& f : rep.outer)
            folds.push_back(json{{"r2", f.r2}, {"hyperparams", hp_json(f.chosen)}});
        const auto& tally = tallies.at(name);
        std::string dir = stage_dir(name, "model");
        write_json_file(dir + "/cv_report.json",
                        json{{"n_samples", by_city.at(name).size()},
                             {"outer_folds", cfg.outer_folds},
                             {"inner_folds", cfg.inner_folds},
                             {"features", spec},
                             {"folds", folds},
                             {"outer_fold_of_sample", rep.outer_fold},
                             {"mean_r2", rep.mean_r2},
                             {"std_r2", rep.std_r2},
                             {"final_hyperparams", hp_json(rep.final_hp)},
                             {"median_tally",
                              {{"too_few_users", tally.too_few_users},
                               {"tract_not_modeled", tally.tract_not_modeled}}}});
        model::write_model_json(dir + "/model.json", finals.at(name), spec);
    }

    std::string pooled = stage_dir("pooled", "model");
    {
        CsvWriter w(pooled + "/city_matrix.csv");
        std::vector<std::string> header = {"train_city"};
        header.insert(header.end(), matrix.cities.begin(), matrix.cities.end());
        w.write_row(header);
        for (size_t a = 0; a < matrix.cities.size(); ++a) {
            std::vector<std::string> row = {matrix.cities[a]};
            for (double v : matrix.score[a]) row.push_back(g17(v));
            w.write_row(row);
        }
    }
    if (by_city.size() >= 2) {
        auto loo = model::leave_one_out(by_city, grid, int(cfg.outer_folds),
                                        int(cfg.inner_folds), cfg.seed);
        CsvWriter w(pooled + "/leave_one_out.csv");
        w.write_row({"city", "train_r2", "test_r2"});
        for (const auto& e : loo)
            w.write_row({e.city, g17(e.train_score), g17(e.test_score)});
    }
    timings.push_back({"model", "", elapsed_s(t0)});
}

void Runner::shap() {
    for (const auto& [name, city] : require_cities(cfg)) {
        auto t0 = Clock::now();
        std::string mdir = stage_dir(name, "model");
        require_artifact(mdir + "/model.json", "model");
        require_artifact(mdir + "/samples.csv", "model");
        std::vector<std::string> names;
        auto m = model::read_model_json(mdir + "/model.json", &names);

        std::vector<std::string> geoids;
        std::vector<std::vector<double>> features;
        std::vector<double> targets;
        {
            CsvReader r(mdir + "/samples.csv");
            size_t geoid_col = r.require_column("tract_geoid");
            size_t target_col = r.require_column("target");
            std::vector<size_t> cols;
            for (const auto& f : names) cols.push_back(r.require_column(f));
            std::vector<std::string_view> row;
            while (r.next_row(row)) {
                geoids.emplace_back(row[geoid_col]);
                auto t = parse_double(row[target_col]);
                if (!t)
                    throw DataError("samples.csv line " + std::to_string(r.line_number()) +
                                    ": bad target");
                targets.push_back(*t);
                std::vector<double> x;
                for (size_t c : cols) {
                    auto v = parse_double(row[c]);
                    if (!v)
                        throw DataError("samples.csv line " +
                                        std::to_string(r.line_number()) + ": bad feature");
                    x.push_back(*v);
                }
                features.push_back(std::move(x));
            }
        }
        if (features.empty()) throw DataError("samples.csv for '" + name + "' has no rows");

        double city_median = model::median(targets);
        std::vector<shap::Attribution> atts;
        atts.reserve(features.size());
        for (const auto& x : features) atts.push_back(shap::tree_shap(m, x));

        std::string dir = stage_dir(name, "shap");
        shap::write_attributions_csv(dir + "/attributions.csv", geoids, atts, names,
                                     city_median);
        auto ranking = shap::feature_importance(atts, names);
        json rank = json::array();
        for (const auto& e : ranking)
            rank.push_back(json{{"feature", e.feature}, {"mean_abs_phi", e.mean_abs_phi}});
        write_json_file(dir + "/importance.json", json{{"city_median_target", city_median},
                                                       {"n_samples", atts.size()},
                                                       {"ranking", rank}});
        if (plots) {
            std::vector<std::vector<double>> percent;
            percent.reserve(atts.size());
            for (const auto& a : atts) percent.push_back(shap::rescale_percent(a, city_median));
            write_text(dir + "/beeswarm.svg", svg::beeswarm_svg(percent, features, names));
        }
        timings.push_back({"shap", name, elapsed_s(t0)});
    }
}

void Runner::report() {
    require_cities(cfg);
    std::string pooled = stage_dir("pooled", "model");
    require_artifact(pooled + "/city_matrix.csv", "model");
    std::vector<std::string> matrix_cities;
    json matrix = json::array();
    {
        CsvReader r(pooled + "/city_matrix.csv");
        matrix_cities.assign(r.header().begin() + 1, r.header().end());
        std::vector<std::string_view> row;
        while (r.next_row(row)) {
            json scores = json::array();
            for (size_t i = 1; i < row.size(); ++i) {
                auto v = parse_double(row[i]);
                if (!v)
                    throw DataError("city_matrix.csv line " +
                                    std::to_string(r.line_number()) + ": bad score");
                scores.push_back(*v);
            }
            matrix.push_back(std::move(scores));
        }
    }
    std::map<std::string, json> loo_rows;
    if (fs::exists(pooled + "/leave_one_out.csv")) {
        CsvReader r(pooled + "/leave_one_out.csv");
        size_t c = r.require_column("city");
        size_t tr = r.require_column("train_r2");
        size_t te = r.require_column("test_r2");
        std::vector<std::string_view> row;
        while (r.next_row(row)) {
            auto train = parse_double(row[tr]);
            auto test = parse_double(row[te]);
            if (!train || !test)
                throw DataError("leave_one_out.csv line " +
                                std::to_string(r.line_number()) + ": bad score");
            loo_rows[std::string(row[c])] = json{{"train_r2", *train}, {"test_r2", *test}};
        }
    }

    for (const auto& [name, city] : cfg.cities) {
        auto t0 = Clock::now();
        json stats = read_json_file(stage_dir(name, "ingest") + "/ingest_stats.json", "ingest");
        json tally = read_json_file(stage_dir(name, "audit") + "/filter_tally.json", "audit");
        json iq = read_json_file(stage_dir(name, "audit") + "/inequality.json", "audit");
        json net = read_json_file(stage_dir(name, "networks") + "/network_summary.json",
                                  "networks");
        json cvr = read_json_file(stage_dir(name, "model") + "/cv_report.json", "model");
        json imp = read_json_file(stage_dir(name, "shap") + "/importance.json", "shap");

        json degree = json::array(), weight = json::array();
        for (const auto& g : net.at("groups")) {
            degree.push_back(g.at("degree_correlation_vs_q1"));
            weight.push_back(g.at("edge_weight_correlation_vs_q1"));
        }
        auto loo_it = loo_rows.find(name);

        // Composition only: every value below is copied from one upstream
        // artifact.
        json report = {
            {"city", name},
            {"users",
             {{"ingested", stats.at("users")},
              {"retained", tally.at("users_after")},
              {"excluded", tally.at("excluded")}}},
            {"production",
             {{"gini", iq.at("gini")},
              {"top_share_fraction", iq.at("top_share_fraction")},
              {"top_share", iq.at("top_share")}}},
            {"networks",
             {{"groups", net.at("n_groups")},
              {"all_weight", net.at("all").at("weight")},
              {"group_weight_sum", net.at("group_weight_sum")},
              {"conservation_exact", net.at("conservation_exact")},
              {"degree_correlation_vs_q1", degree},
              {"edge_weight_correlation_vs_q1", weight}}},
            {"model",
             {{"n_samples", cvr.at("n_samples")},
              {"mean_r2", cvr.at("mean_r2")},
              {"std_r2", cvr.at("std_r2")},
              {"final_hyperparams", cvr.at("final_hyperparams")}}},
            {"generalization",
             {{"cities", matrix_cities},
              {"matrix", matrix},
              {"leave_one_out", loo_it == loo_rows.end() ? json() : loo_it->second}}},
            {"shap",
             {{"city_median_target", imp.at("city_median_target")},
              {"top_features", imp.at("ranking")}}},
        };
        auto errors = jsonschema::validate(report, report_schema());
        if (!errors.empty()) {
            std::string msg = "report for '" + name + "' violates the shipped schema:";
            for (const auto& e : errors) msg += "\n  " + e;
            throw DataError(msg);
        }
        write_json_file(stage_dir(name, "report") + "/report.json", report);
        timings.push_back({"report", name, elapsed_s(t0)});
    }
}

void Runner::write_metadata(int64_t started_unix, int64_t finished_unix) const {
    json stages = json::array();
    for (const auto& t : timings) {
        json e = {{"stage", t.stage}, {"seconds", t.seconds}};
        if (!t.city.empty()) e["city"] = t.city;
        stages.push_back(std::move(e));
    }
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(cfg_hash));
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create '" + cfg.output_dir + "': " + ec.message());
    write_json_file((fs::path(cfg.output_dir) / "run_metadata.json").string(),
                    json{{"tool", "mobaudit"},
                         {"version", kVersion},
                         {"config_path", config_path},
                         {"config_hash", hash},
                         {"seed", cfg.seed},
                         {"started_unix", started_unix},
                         {"finished_unix", finished_unix},
                         {"stages", stages}});
}

const json& report_schema() {
    static const json schema = json::parse(R"SCHEMA(
{
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "city audit report",
  "type": "object",
  "additionalProperties": false,
  "required": ["city", "users", "production", "networks", "model", "generalization", "shap"],
  "properties": {
    "city": {"type": "string"},
    "users": {
      "type": "object",
      "additionalProperties": false,
      "required": ["ingested", "retained", "excluded"],
      "properties": {
        "ingested": {"type": "integer", "minimum": 0},
        "retained": {"type": "integer", "minimum": 0},
        "excluded": {
          "type": "object",
          "additionalProperties": false,
          "required": ["count_out_of_bounds", "no_home", "no_acs_tract", "low_population"],
          "properties": {
            "count_out_of_bounds": {"type": "integer", "minimum": 0},
            "no_home": {"type": "integer", "minimum": 0},
            "no_acs_tract": {"type": "integer", "minimum": 0},
            "low_population": {"type": "integer", "minimum": 0}
          }
        }
      }
    },
    "production": {
      "type": "object",
      "additionalProperties": false,
      "required": ["gini", "top_share_fraction", "top_share"],
      "properties": {
        "gini": {"type": "number", "minimum": 0, "maximum": 1},
        "top_share_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "top_share": {"type": "number", "minimum": 0, "maximum": 1}
      }
    },
    "networks": {
      "type": "object",
      "additionalProperties": false,
      "required": ["groups", "all_weight", "group_weight_sum", "conservation_exact",
                   "degree_correlation_vs_q1", "edge_weight_correlation_vs_q1"],
      "properties": {
        "groups": {"type": "integer", "minimum": 1},
        "all_weight": {"type": "integer", "minimum": 0},
        "group_weight_sum": {"type": "integer", "minimum": 0},
        "conservation_exact": {"type": "boolean"},
        "degree_correlation_vs_q1": {
          "type": "array",
          "minItems": 1,
          "items": {"type": ["number", "null"], "minimum": -1, "maximum": 1}
        },
        "edge_weight_correlation_vs_q1": {
          "type": "array",
          "minItems": 1,
          "items": {"type": ["number", "null"], "minimum": -1, "maximum": 1}
        }
      }
    },
    "model": {
      "type": "object",
      "additionalProperties": false,
      "required": ["n_samples", "mean_r2", "std_r2", "final_hyperparams"],
      "properties": {
        "n_samples": {"type": "integer", "minimum": 1},
        "mean_r2": {"type": "number", "minimum": 0, "maximum": 1},
        "std_r2": {"type": "number", "minimum": 0},
        "final_hyperparams": {
          "type": "object",
          "additionalProperties": false,
          "required": ["n_trees", "max_depth", "min_leaf", "feature_subset"],
          "properties": {
            "n_trees": {"type": "integer", "minimum": 1},
            "max_depth": {"type": "integer"},
            "min_leaf": {"type": "integer", "minimum": 1},
            "feature_subset": {"type": "integer", "minimum": 1}
          }
        }
      }
    },
    "generalization": {
      "type": "object",
      "additionalProperties": false,
      "required": ["cities", "matrix", "leave_one_out"],
      "properties": {
        "cities": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "matrix": {
          "type": "array",
          "minItems": 1,
          "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}
        },
        "leave_one_out": {
          "type": ["object", "null"],
          "additionalProperties": false,
          "required": ["train_r2", "test_r2"],
          "properties": {
            "train_r2": {"type": "number"},
            "test_r2": {"type": "number"}
          }
        }
      }
    },
    "shap": {
      "type": "object",
      "additionalProperties": false,
      "required": ["city_median_target", "top_features"],
      "properties": {
        "city_median_target": {"type": "number"},
        "top_features": {
          "type": "array",
          "minItems": 1,
          "items": {
            "type": "object",
            "additionalProperties": false,
            "required": ["feature", "mean_abs_phi"],
            "properties": {
              "feature": {"type": "string"},
              "mean_abs_phi": {"type": "number", "minimum": 0}
            }
          }
        }
      }
    }
  }
}
)SCHEMA");
    return schema;
}

} // namespace mobaudit::pipeline
