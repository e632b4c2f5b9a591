#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mobaudit/ingest.hpp"
#include "mobaudit/model.hpp"
#include "mobaudit/synth.hpp"

namespace mobaudit::config {

// Just enough TOML for flat configs: [section.sub] headers, key = value
// pairs, strings, integers, floats, booleans, single- or multi-line arrays,
// and # comments. Values live in a flat table keyed "section.sub.key".
struct Value {
    enum class Kind { string, integer, real, boolean, array };
    Kind kind = Kind::string;
    std::string str;
    int64_t integer = 0;
    double real = 0; // also filled for integers
    bool boolean = false;
    std::vector<Value> array;
};

using Table = std::map<std::string, Value>;

Table parse_toml(const std::string& text, const std::string& source_name = "config");
Table parse_toml_file(const std::string& path);

// "dotted.key=value" from a --set flag; value uses the same grammar.
void apply_override(Table& table, const std::string& assignment);

struct CityConfig {
    std::string name;
    std::string pings_path;
    std::string boundaries_path;
    std::map<std::string, std::string> acs_tables; // table name -> CSV path
    double tz_offset_hours = 0;
};

// Remote ACS download spec; only used by the fetch subcommand, never by tests.
struct FetchConfig {
    std::string endpoint; // e.g. https://api.census.gov/data/{year}/acs/acs5
    int64_t year = 2019;
    std::vector<std::string> tables;
    std::string state;
    std::vector<std::string> counties;
    std::string cache_dir = "acs_cache";
};

struct AuditConfig {
    uint64_t seed = 1729;
    std::string output_dir = "out";

    std::optional<int64_t> study_start, study_end; // UTC seconds, [start, end)

    uint64_t min_pings = 30;      // strict bounds: keep min < count < max
    uint64_t max_pings = 100000;
    double min_tract_population = 500;
    size_t min_users_per_tract = 5;
    double stay_radius_m = 200;
    double stay_dwell_s = 600;
    double backbone_delta = 1.0; // keep w > E + delta * sqrt(V)
    uint64_t min_edge_weight = 2;
    bool drop_self_loops = false; // same-tract trips carry visit intensity by default
    ingest::NightWindow night;
    size_t n_groups = 20;
    double top_share_fraction = 0.2;

    std::vector<std::string> features; // empty = census::default_feature_spec()
    std::vector<int64_t> grid_trees{100};
    std::vector<int64_t> grid_depth{4, 8, -1}; // -1 = unlimited
    std::vector<int64_t> grid_leaf{2, 5, 10};
    std::vector<int64_t> grid_subset; // empty = {ceil(d/3), d}
    int64_t outer_folds = 10;
    int64_t inner_folds = 3;

    std::map<std::string, CityConfig> cities;
    std::optional<FetchConfig> fetch;
    std::optional<synth::SynthConfig> synth; // [synth] section, for the fixture generator
};

// Parses and validates; every failure is a ConfigError naming the key.
AuditConfig config_from_table(const Table& table);
AuditConfig load_config(const std::string& path);

// Hyperparameter grid from the config lists for a given feature count.
std::vector<model::Hyperparams> build_grid(const AuditConfig& cfg, size_t n_features);

// Canonical text form (sorted keys, typed literals) and its FNV-1a hash;
// the hash goes into run metadata so artifact provenance is checkable.
std::string canonical_dump(const Table& table);
uint64_t config_hash(const Table& table);

// Accepts unix seconds or "YYYY-MM-DD[THH:MM:SS[Z]]" (UTC).
int64_t parse_time(const Value& v, const std::string& key);

} // namespace mobaudit::config
