#pragma once

#include <map>
#include <string>

#include "mobaudit/config.hpp"

namespace mobaudit::census {

struct FetchResult {
    std::map<std::string, std::string> table_paths; // table -> cached CSV path
    size_t from_cache = 0;
    size_t fetched = 0;
};

// Downloads one CSV per table from an endpoint template with {year},
// {table}, {state} and {counties} placeholders, caching the raw bytes under
// <cache_dir>/<year>_<state>_<table>.csv. A present cache file short-circuits
// the network entirely. 404 raises DataError naming the table; transient
// failures retry max_retries times with doubling backoff, then raise
// DependencyError. Only plain http endpoints are supported (the public runs
// sit behind a caching proxy in practice; tests use a loopback server).
FetchResult fetch_acs(const config::FetchConfig& spec, int max_retries = 3,
                      int initial_backoff_ms = 250);

// Template expansion, exposed for tests: {year}, {table}, {state},
// {counties} (comma-joined).
std::string expand_endpoint(const std::string& endpoint, int64_t year,
                            const std::string& table, const std::string& state,
                            const std::vector<std::string>& counties);

} // namespace mobaudit::census
