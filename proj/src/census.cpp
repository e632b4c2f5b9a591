#include "mobaudit/census.hpp"

#include <algorithm>
#include <unordered_map>

#include "mobaudit/csv.hpp"
#include "mobaudit/errors.hpp"

namespace mobaudit::census {

std::optional<double> tract_field(const TractRecord& t, std::string_view name) {
    if (name == "pct_black") return t.pct_black;
    if (name == "pct_white") return t.pct_white;
    if (name == "pct_asian") return t.pct_asian;
    if (name == "pct_other") return t.pct_other;
    if (name == "poverty_rate") return t.poverty_rate;
    if (name == "pct_academic") return t.pct_academic;
    if (name == "pct_male") return t.pct_male;
    if (name == "age_under_25") return t.age_under_25;
    if (name == "age_25_44") return t.age_25_44;
    if (name == "age_45_64") return t.age_45_64;
    if (name == "age_65_plus") return t.age_65_plus;
    if (name == "population") return t.population;
    if (name == "pop_25plus") return t.pop_25plus;
    throw ConfigError("unknown tract field '" + std::string(name) + "'");
}

AcsSchema AcsSchema::defaults() {
    // Real ACS variable codes where one column suffices; descriptive names
    // for the age buckets (no single published column covers them). All of
    // these are overridable in config.
    AcsSchema s;
    s.population = {"S0101", "S0101_C01_001E"};
    s.pop_25plus = {"S1501", "S1501_C01_006E"};
    s.fractions["poverty_rate"] = {{"S1701", "S1701_C02_001E"}, {"S1701", "S1701_C01_001E"}};
    s.fractions["pct_academic"] = {{"S1501", "S1501_C01_015E"}, {"S1501", "S1501_C01_006E"}};
    s.fractions["pct_male"] = {{"S0101", "S0101_C03_001E"}, {"S0101", "S0101_C01_001E"}};
    s.fractions["pct_black"] = {{"B02001", "B02001_003E"}, {"B02001", "B02001_001E"}};
    s.fractions["pct_white"] = {{"B02001", "B02001_002E"}, {"B02001", "B02001_001E"}};
    s.fractions["pct_asian"] = {{"B02001", "B02001_005E"}, {"B02001", "B02001_001E"}};
    s.fractions["age_under_25"] = {{"S0101", "AGE_UNDER_25"}, {"S0101", "S0101_C01_001E"}};
    s.fractions["age_25_44"] = {{"S0101", "AGE_25_44"}, {"S0101", "S0101_C01_001E"}};
    s.fractions["age_45_64"] = {{"S0101", "AGE_45_64"}, {"S0101", "S0101_C01_001E"}};
    s.fractions["age_65_plus"] = {{"S0101", "AGE_65_PLUS"}, {"S0101", "S0101_C01_001E"}};
    return s;
}

namespace {

using TableValues = std::unordered_map<std::string, std::unordered_map<std::string, double>>;

// tract -> column -> value; cells that fail to parse (ACS publishes "-",
// "(X)", "null", empty) are simply absent.
TableValues read_table(const std::string& path, const std::string& geoid_column) {
    TableValues values;
    CsvReader r(path);
    size_t geoid_idx = r.require_column(geoid_column);
    const auto& header = r.header();
    std::vector<std::string_view> f;
    while (r.next_row(f)) {
        if (geoid_idx >= f.size()) continue;
        std::string raw(f[geoid_idx]);
        std::string tract = raw.size() > 11 ? raw.substr(raw.size() - 11) : raw;
        auto [it, fresh] = values.try_emplace(tract);
        if (!fresh)
            throw DataError(path + ": GEOID " + tract + " appears twice");
        for (size_t c = 0; c < header.size() && c < f.size(); ++c) {
            if (c == geoid_idx) continue;
            if (auto v = parse_double(f[c])) it->second.emplace(header[c], *v);
        }
    }
    return values;
}

std::optional<double> cell(const std::map<std::string, TableValues>& tables,
                           const AcsColumnRef& ref, const std::string& tract) {
    auto t = tables.find(ref.table);
    if (t == tables.end()) return std::nullopt;
    auto row = t->second.find(tract);
    if (row == t->second.end()) return std::nullopt;
    auto v = row->second.find(ref.column);
    if (v == row->second.end()) return std::nullopt;
    return v->second;
}

std::optional<double> fraction_of(const std::map<std::string, TableValues>& tables,
                                  const AcsFieldSpec& spec, const std::string& tract) {
    auto num = cell(tables, spec.numerator, tract);
    auto den = cell(tables, spec.denominator, tract);
    if (!num || !den || *den <= 0) return std::nullopt;
    return std::clamp(*num / *den, 0.0, 1.0);
}

} // namespace

std::vector<TractRecord> load_acs(const std::map<std::string, std::string>& table_paths,
                                  const AcsSchema& schema, const std::string& city_id,
                                  std::vector<std::string>* missing_report) {
    std::map<std::string, TableValues> tables;
    for (const auto& [name, path] : table_paths)
        tables.emplace(name, read_table(path, schema.geoid_column));

    // Candidate universe: union of tract GEOIDs, sorted for determinism.
    std::vector<std::string> universe;
    for (const auto& [name, tv] : tables)
        for (const auto& [tract, _] : tv) universe.push_back(tract);
    std::sort(universe.begin(), universe.end());
    universe.erase(std::unique(universe.begin(), universe.end()), universe.end());

    std::vector<TractRecord> records;
    for (const auto& tract : universe) {
        bool in_all = true;
        for (const auto& [name, tv] : tables) {
            if (!tv.count(tract)) {
                if (missing_report) missing_report->push_back(tract + ":" + name);
                in_all = false;
            }
        }
        if (!in_all) continue;

        TractRecord rec;
        rec.tract_geoid = tract;
        rec.city_id = city_id;
        rec.population = cell(tables, schema.population, tract);
        rec.pop_25plus = cell(tables, schema.pop_25plus, tract);
        auto frac = [&](const char* name) -> std::optional<double> {
            auto it = schema.fractions.find(name);
            if (it == schema.fractions.end()) return std::nullopt;
            return fraction_of(tables, it->second, tract);
        };
        rec.pct_black = frac("pct_black");
        rec.pct_white = frac("pct_white");
        rec.pct_asian = frac("pct_asian");
        rec.poverty_rate = frac("poverty_rate");
        rec.pct_academic = frac("pct_academic");
        rec.pct_male = frac("pct_male");
        rec.age_under_25 = frac("age_under_25");
        rec.age_25_44 = frac("age_25_44");
        rec.age_45_64 = frac("age_45_64");
        rec.age_65_plus = frac("age_65_plus");
        // Residual ethnicity share; inconsistent bases (sum far above 1)
        // leave it absent so tract filtering drops the record.
        if (rec.pct_black && rec.pct_white && rec.pct_asian) {
            double sum = *rec.pct_black + *rec.pct_white + *rec.pct_asian;
            if (sum <= 1.02) rec.pct_other = std::clamp(1.0 - sum, 0.0, 1.0);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<double> feature_vector(const TractRecord& t,
                                   const std::vector<std::string>& feature_spec) {
    std::vector<double> out;
    out.reserve(feature_spec.size());
    for (const auto& name : feature_spec) {
        auto v = tract_field(t, name);
        if (!v)
            throw DataError("tract " + t.tract_geoid + " missing value for feature '" + name +
                            "'");
        out.push_back(*v);
    }
    return out;
}

const std::vector<std::string>& default_feature_spec() {
    static const std::vector<std::string> kSpec{
        "pct_black",    "pct_white",  "pct_asian",  "pct_other",
        "poverty_rate", "pct_academic", "pct_male",
        "age_under_25", "age_25_44",  "age_45_64",  "age_65_plus",
    };
    return kSpec;
}

std::pair<std::vector<TractRecord>, TractFilterTally>
filter_tracts(const std::vector<TractRecord>& records, double min_population) {
    std::vector<TractRecord> kept;
    TractFilterTally tally;
    for (const auto& r : records) {
        if (!r.population || *r.population < min_population) {
            ++tally.low_population;
            continue;
        }
        bool complete = true;
        for (const auto& name : default_feature_spec())
            if (!tract_field(r, name)) {
                complete = false;
                break;
            }
        if (!complete) {
            ++tally.missing_fields;
            continue;
        }
        kept.push_back(r);
    }
    return {std::move(kept), tally};
}

std::map<std::string, TractRecord> by_tract(const std::vector<TractRecord>& records) {
    std::map<std::string, TractRecord> m;
    for (const auto& r : records) m.emplace(r.tract_geoid, r);
    return m;
}

} // namespace mobaudit::census
