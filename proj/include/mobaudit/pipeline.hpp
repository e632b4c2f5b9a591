#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mobaudit/config.hpp"

namespace mobaudit::pipeline {

inline constexpr const char* kVersion = "0.1.0";

// Wall-clock duration of one stage invocation. Lives only in run metadata so
// the data artifacts stay byte-identical across reruns.
struct StageTiming {
    std::string stage;
    std::string city; // empty for pooled or city-independent work
    double seconds = 0;
};

// Executes pipeline stages against a parsed config. Every stage writes its
// artifacts under <output_dir>/<city>/<stage>/ (cross-city outputs under
// <output_dir>/pooled/<stage>/) and reads its inputs back from the upstream
// stage's files, so stages can run as separate processes in any order that
// respects the data flow. A missing upstream artifact raises DependencyError
// naming the file. The one exception: `audit` runs the ingest step itself
// when profiles are absent, since it is the entry point for fixture-driven
// runs.
struct Runner {
    config::AuditConfig cfg;
    uint64_t cfg_hash = 0; // config::config_hash of the raw table
    std::string config_path;
    bool plots = false;

    std::vector<StageTiming> timings; // appended by each completed stage

    void synth();    // [synth] -> fixture under <output_dir>/fixture/<city_id>/
    void fetch();    // [fetch] -> cached ACS tables
    void ingest();   // pings -> profiles.csv, ingest_stats.json
    void audit();    // profiles -> filtered_profiles.csv, filter_tally.json, inequality.json
    void networks(); // trips -> edge lists, backbones, correlations.csv, network_summary.json
    void model();    // samples.csv, cv_report.json, model.json per city; pooled matrices
    void shap();     // attributions.csv, importance.json
    void report();   // report.json per city, validated against the shipped schema

    // <output_dir>/run_metadata.json: tool version, config hash, seed, stage
    // timings, wall-clock bounds. The only artifact with time-dependent bytes.
    void write_metadata(int64_t started_unix, int64_t finished_unix) const;

    // <output_dir>/<city>/<stage>, created on demand.
    std::string stage_dir(const std::string& city, const std::string& stage) const;
};

// The schema `report` validates against; matches the repository's
// schemas/report.schema.json (a test keeps the two in sync).
const nlohmann::json& report_schema();

} // namespace mobaudit::pipeline
