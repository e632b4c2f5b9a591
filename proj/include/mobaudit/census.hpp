#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mobaudit::census {

// Tract-level demographics. Fractions are absent (not zero) when the source
// tables lack the value; downstream filters treat absence as an exclusion.
struct TractRecord {
    std::string tract_geoid; // 11-char GEOID
    std::string city_id;
    std::optional<double> population;
    std::optional<double> pop_25plus;
    std::optional<double> pct_black;
    std::optional<double> pct_white;
    std::optional<double> pct_asian;
    std::optional<double> pct_other; // residual: 1 - (black + white + asian)
    std::optional<double> poverty_rate;
    std::optional<double> pct_academic; // Bachelor's or higher among 25+
    std::optional<double> pct_male;
    std::optional<double> age_under_25;
    std::optional<double> age_25_44;
    std::optional<double> age_45_64;
    std::optional<double> age_65_plus;
};

// Named access to the fraction fields; nullopt for unknown names is not an
// option — unknown names throw ConfigError (callers pass validated specs).
std::optional<double> tract_field(const TractRecord& t, std::string_view name);

// One raw value inside a named table.
struct AcsColumnRef {
    std::string table;  // key into the table-path map, e.g. "S1701"
    std::string column; // column header inside that CSV
};

// A fraction is numerator / denominator, both raw counts.
struct AcsFieldSpec {
    AcsColumnRef numerator;
    AcsColumnRef denominator;
};

// Where every TractRecord field comes from. The variable codes are
// best-effort defaults and swappable in config; fixtures use the same schema
// mechanism with synthetic column names.
struct AcsSchema {
    std::string geoid_column = "GEO_ID"; // last 11 characters form the tract GEOID
    AcsColumnRef population;
    AcsColumnRef pop_25plus;
    std::map<std::string, AcsFieldSpec> fractions; // field name -> source
    static AcsSchema defaults();
};

// Joins the per-table CSVs into one record per tract present in every table.
// Tracts missing from any table are skipped and reported via missing_report
// ("<tract>:<table>" entries, sorted). GEOID collisions within one file are a
// data error. Records come back sorted by tract GEOID.
std::vector<TractRecord> load_acs(const std::map<std::string, std::string>& table_paths,
                                  const AcsSchema& schema, const std::string& city_id,
                                  std::vector<std::string>* missing_report = nullptr);

// Ordered feature extraction; same spec must be used for training and
// prediction. Unknown feature name -> ConfigError; absent value -> DataError.
std::vector<double> feature_vector(const TractRecord& t,
                                   const std::vector<std::string>& feature_spec);

// Ethnicity (4), poverty, education, sex, and four age shares.
const std::vector<std::string>& default_feature_spec();

struct TractFilterTally {
    uint64_t low_population = 0;
    uint64_t missing_fields = 0;
};

// Keeps records with population >= min_population and every default-spec
// field present. Idempotent.
std::pair<std::vector<TractRecord>, TractFilterTally>
filter_tracts(const std::vector<TractRecord>& records, double min_population = 500);

// Lookup table keyed by tract GEOID.
std::map<std::string, TractRecord> by_tract(const std::vector<TractRecord>& records);

} // namespace mobaudit::census
