#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobaudit/census.hpp"
#include "mobaudit/errors.hpp"
#include "mobaudit/inequality.hpp"
#include "mobaudit/ingest.hpp"
#include "mobaudit/jsonschema.hpp"
#include "mobaudit/model.hpp"
#include "mobaudit/pipeline.hpp"
#include "mobaudit/synth.hpp"

using namespace mobaudit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

json read_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    json j;
    in >> j;
    return j;
}

// Synth fixture plus a runner configured to consume it. 16 tracts x 30 users
// over 10 days keeps every stage under a second.
struct PipelineFixture {
    TempDir dir;
    pipeline::Runner runner;
    std::string city = "pipeville";

    explicit PipelineFixture(const std::string& name) : dir(name) {
        synth::SynthConfig sc;
        sc.city_id = city;
        sc.n_tracts = 16;
        sc.users_per_tract = 30;
        sc.study_days = 10;
        sc.p_home = 0.8;
        sc.effect.intercept = std::log(8.0);
        sc.effect.sigma = 0.3;
        sc.effect.coef["poverty_rate"] = -0.5;
        fs::create_directories(dir.path / "fx");
        auto fx = synth::emit_fixture(sc, 99, (dir.path / "fx").string());

        config::AuditConfig cfg;
        cfg.seed = 99;
        cfg.output_dir = (dir.path / "out").string();
        cfg.grid_trees = {25};
        cfg.grid_depth = {6};
        cfg.grid_leaf = {2};
        cfg.grid_subset = {11};
        cfg.outer_folds = 4;
        cfg.inner_folds = 2;
        cfg.synth = sc;
        config::CityConfig cc;
        cc.name = city;
        cc.pings_path = fx.pings;
        cc.boundaries_path = fx.boundaries;
        cc.acs_tables = fx.acs_tables;
        cfg.cities[city] = cc;
        runner.cfg = cfg;
        runner.cfg_hash = 0x1234;
        runner.config_path = "unit-test";
    }

    std::string out(const std::string& rel) const {
        return (dir.path / "out" / rel).string();
    }

    void run_all() {
        runner.ingest();
        runner.audit();
        runner.networks();
        runner.model();
        runner.shap();
        runner.report();
    }
};

std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> bytes;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        bytes[fs::relative(e.path(), root).string()] = {
            std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }
    return bytes;
}

} // namespace

TEST_CASE("pipeline: full chain writes coherent, cross-checked artifacts") {
    PipelineFixture fx("mobaudit_pipe_full");
    fx.run_all();

    // ingest vs audit bookkeeping
    json stats = read_json(fx.out("pipeville/ingest/ingest_stats.json"));
    json tally = read_json(fx.out("pipeville/audit/filter_tally.json"));
    CHECK(stats.at("users").get<uint64_t>() == 480);
    CHECK(stats.at("malformed").get<uint64_t>() == 0);
    uint64_t excluded = 0;
    for (const auto& [k, v] : tally.at("excluded").items()) excluded += v.get<uint64_t>();
    CHECK(tally.at("users_before").get<uint64_t>() == 480);
    CHECK(tally.at("users_after").get<uint64_t>() + excluded == 480);

    // the published Gini is exactly the statistic of the published cohort
    auto filtered = ingest::read_profiles(fx.out("pipeville/audit/filtered_profiles.csv"));
    std::vector<double> counts;
    for (const auto& p : filtered) counts.push_back(double(p.ping_count));
    json iq = read_json(fx.out("pipeville/audit/inequality.json"));
    CHECK(iq.at("n_users").get<size_t>() == filtered.size());
    CHECK(iq.at("gini").get<double>() == ineq::gini(counts));
    CHECK(iq.at("top_share").get<double>() == ineq::top_share(counts, 0.2));
    CHECK(iq.at("lorenz").size() == 101);

    // group networks conserve the all-users trip mass exactly
    json net = read_json(fx.out("pipeville/networks/network_summary.json"));
    CHECK(net.at("conservation_exact").get<bool>());
    uint64_t group_sum = 0;
    for (const auto& g : net.at("groups")) group_sum += g.at("weight").get<uint64_t>();
    CHECK(group_sum == net.at("all").at("weight").get<uint64_t>());
    CHECK(net.at("groups").size() == 20);

    // per-city CV detail equals the generalization-matrix diagonal
    json cvr = read_json(fx.out("pipeville/model/cv_report.json"));
    std::ifstream matrix_csv(fx.out("pooled/model/city_matrix.csv"));
    std::string header, row;
    std::getline(matrix_csv, header);
    std::getline(matrix_csv, row);
    CHECK(header == "train_city,pipeville");
    char expect[64];
    std::snprintf(expect, sizeof expect, "pipeville,%.17g", cvr.at("mean_r2").get<double>());
    CHECK(row == expect);
    CHECK(cvr.at("outer_fold_of_sample").size() == cvr.at("n_samples").get<size_t>());
    CHECK(cvr.at("folds").size() == 4);

    // the stored model round-trips with the feature spec used for samples
    std::vector<std::string> names;
    auto m = model::read_model_json(fx.out("pipeville/model/model.json"), &names);
    CHECK(names == census::default_feature_spec());
    CHECK(m.n_features == names.size());

    // importance ranking is complete and descending
    json imp = read_json(fx.out("pipeville/shap/importance.json"));
    REQUIRE(imp.at("ranking").size() == names.size());
    for (size_t i = 1; i < imp.at("ranking").size(); ++i)
        CHECK(imp.at("ranking")[i - 1].at("mean_abs_phi").get<double>() >=
              imp.at("ranking")[i].at("mean_abs_phi").get<double>());

    // report validates against the shipped schema file and only restates
    // upstream numbers
    auto errors = jsonschema::validate_file(fx.out("pipeville/report/report.json"),
                                            MOBAUDIT_SOURCE_DIR
                                            "/schemas/report.schema.json");
    for (const auto& e : errors) FAIL_CHECK(e);
    json report = read_json(fx.out("pipeville/report/report.json"));
    CHECK(report.at("users").at("retained") == tally.at("users_after"));
    CHECK(report.at("production").at("gini") == iq.at("gini"));
    CHECK(report.at("model").at("mean_r2") == cvr.at("mean_r2"));
    CHECK(report.at("networks").at("all_weight") == net.at("all").at("weight"));
    CHECK(report.at("generalization").at("leave_one_out").is_null());
    CHECK(report.at("shap").at("top_features") == imp.at("ranking"));

    // stage timings accumulated for metadata
    CHECK(fx.runner.timings.size() == 6);
    fx.runner.write_metadata(100, 200);
    json meta = read_json(fx.out("run_metadata.json"));
    CHECK(meta.at("config_hash").get<std::string>() == "0000000000001234");
    CHECK(meta.at("seed").get<uint64_t>() == 99);
    CHECK(meta.at("stages").size() == 6);
}

TEST_CASE("pipeline: reruns are byte-identical") {
    PipelineFixture fx("mobaudit_pipe_rerun");
    fx.run_all();
    auto first = snapshot(fx.dir.path / "out");
    fx.run_all();
    auto second = snapshot(fx.dir.path / "out");
    REQUIRE(first.size() == second.size());
    for (const auto& [rel, bytes] : first) {
        INFO("file ", rel);
        CHECK(bytes == second.at(rel));
    }
}

TEST_CASE("pipeline: missing upstream artifacts name the file and stage") {
    PipelineFixture fx("mobaudit_pipe_missing");
    using doctest::Contains;
    CHECK_THROWS_WITH_AS(fx.runner.networks(), Contains("filtered_profiles.csv"),
                         DependencyError);
    CHECK_THROWS_WITH_AS(fx.runner.model(), Contains("run the audit stage"),
                         DependencyError);
    CHECK_THROWS_WITH_AS(fx.runner.shap(), Contains("model.json"), DependencyError);
    CHECK_THROWS_WITH_AS(fx.runner.report(), Contains("city_matrix.csv"), DependencyError);
}

TEST_CASE("pipeline: audit ingests on demand, other stages never do") {
    PipelineFixture fx("mobaudit_pipe_auto");
    fx.runner.audit();
    CHECK(fs::exists(fx.out("pipeville/ingest/profiles.csv")));
    CHECK(fs::exists(fx.out("pipeville/audit/inequality.json")));
    CHECK(fx.runner.timings.size() == 2); // implied ingest + audit
}

TEST_CASE("pipeline: synth stage emits the fixture under output_dir") {
    PipelineFixture fx("mobaudit_pipe_synth");
    fx.runner.synth();
    CHECK(fs::exists(fx.out("fixture/pipeville/pings.csv")));
    CHECK(fs::exists(fx.out("fixture/pipeville/manifest.json")));
    CHECK(fs::exists(fx.out("fixture/pipeville/boundaries.geojson")));
    CHECK(fs::exists(fx.out("fixture/pipeville/acs/S0101.csv")));

    fx.runner.cfg.synth.reset();
    CHECK_THROWS_AS(fx.runner.synth(), ConfigError);
    fx.runner.cfg.cities.clear();
    CHECK_THROWS_AS(fx.runner.ingest(), ConfigError);
    CHECK_THROWS_AS(fx.runner.report(), ConfigError);
}
