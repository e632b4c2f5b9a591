#include "mobaudit/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "mobaudit/census.hpp"
#include "mobaudit/csv.hpp"
#include "mobaudit/errors.hpp"

namespace mobaudit::config {

namespace {

[[noreturn]] void fail(const std::string& source, size_t line, const std::string& what) {
    throw ConfigError(source + ":" + std::to_string(line) + ": " + what);
}

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

void skip_ws(std::string_view s, size_t& i) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

// Parses one value starting at s[i]; advances i past it. Arrays may not be
// closed yet when the line ends — the caller feeds more input in that case.
struct ValueParser {
    std::string source;
    size_t line = 0;

    Value parse(std::string_view s, size_t& i) {
        skip_ws(s, i);
        if (i >= s.size()) fail(source, line, "missing value");
        char c = s[i];
        if (c == '"') return parse_string(s, i);
        if (c == '[') return parse_array(s, i);
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' ||
            c == '.')
            return parse_number(s, i);
        return parse_keyword(s, i);
    }

    Value parse_string(std::string_view s, size_t& i) {
        Value v;
        v.kind = Value::Kind::string;
        ++i; // opening quote
        while (i < s.size() && s[i] != '"') {
            if (s[i] == '\\') {
                ++i;
                if (i >= s.size()) fail(source, line, "dangling escape in string");
                switch (s[i]) {
                case 'n': v.str += '\n'; break;
                case 't': v.str += '\t'; break;
                case '"': v.str += '"'; break;
                case '\\': v.str += '\\'; break;
                default: fail(source, line, std::string("unknown escape \\") + s[i]);
                }
            } else {
                v.str += s[i];
            }
            ++i;
        }
        if (i >= s.size()) fail(source, line, "unterminated string");
        ++i; // closing quote
        return v;
    }

    Value parse_number(std::string_view s, size_t& i) {
        size_t start = i;
        if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
        bool is_real = false;
        while (i < s.size() &&
               (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' ||
                s[i] == 'e' || s[i] == 'E' ||
                ((s[i] == '+' || s[i] == '-') && (s[i - 1] == 'e' || s[i - 1] == 'E')))) {
            if (s[i] == '.' || s[i] == 'e' || s[i] == 'E') is_real = true;
            ++i;
        }
        std::string_view tok = s.substr(start, i - start);
        Value v;
        if (is_real) {
            auto d = parse_double(tok);
            if (!d) fail(source, line, "bad number '" + std::string(tok) + "'");
            v.kind = Value::Kind::real;
            v.real = *d;
        } else {
            auto n = parse_i64(tok);
            if (!n) fail(source, line, "bad integer '" + std::string(tok) + "'");
            v.kind = Value::Kind::integer;
            v.integer = *n;
            v.real = static_cast<double>(*n);
        }
        return v;
    }

    Value parse_keyword(std::string_view s, size_t& i) {
        size_t start = i;
        while (i < s.size() && ident_char(s[i])) ++i;
        std::string_view tok = s.substr(start, i - start);
        Value v;
        v.kind = Value::Kind::boolean;
        if (tok == "true") {
            v.boolean = true;
            return v;
        }
        if (tok == "false") return v;
        fail(source, line, "bad value '" + std::string(tok) + "'");
    }

    Value parse_array(std::string_view s, size_t& i) {
        Value v;
        v.kind = Value::Kind::array;
        ++i; // [
        for (;;) {
            skip_ws(s, i);
            if (i >= s.size()) fail(source, line, "unterminated array");
            if (s[i] == ']') {
                ++i;
                return v;
            }
            v.array.push_back(parse(s, i));
            skip_ws(s, i);
            if (i < s.size() && s[i] == ',') {
                ++i;
                continue;
            }
            if (i < s.size() && s[i] == ']') {
                ++i;
                return v;
            }
            fail(source, line, "expected ',' or ']' in array");
        }
    }
};

// Strips a trailing comment that starts outside any string literal.
std::string strip_comment(const std::string& raw) {
    bool in_string = false;
    for (size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '"' && (i == 0 || raw[i - 1] != '\\')) in_string = !in_string;
        if (raw[i] == '#' && !in_string) return raw.substr(0, i);
    }
    return raw;
}

std::string kind_name(Value::Kind k) {
    switch (k) {
    case Value::Kind::string: return "string";
    case Value::Kind::integer: return "integer";
    case Value::Kind::real: return "float";
    case Value::Kind::boolean: return "boolean";
    case Value::Kind::array: return "array";
    }
    return "?";
}

} // namespace

Table parse_toml(const std::string& text, const std::string& source_name) {
    Table table;
    std::set<std::string> sections_seen;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    size_t line_no = 0;

    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        std::string stripped = strip_comment(raw);
        size_t i = 0;
        skip_ws(stripped, i);
        if (i >= stripped.size()) continue;

        if (stripped[i] == '[') {
            size_t close = stripped.find(']', i);
            if (close == std::string::npos) fail(source_name, line_no, "unclosed '['");
            section = stripped.substr(i + 1, close - i - 1);
            if (section.empty()) fail(source_name, line_no, "empty section name");
            for (char c : section)
                if (!ident_char(c) && c != '.')
                    fail(source_name, line_no, "bad section name '" + section + "'");
            if (!sections_seen.insert(section).second)
                fail(source_name, line_no, "section [" + section + "] reopened");
            i = close + 1;
            skip_ws(stripped, i);
            if (i < stripped.size())
                fail(source_name, line_no, "trailing content after section header");
            continue;
        }

        size_t key_start = i;
        while (i < stripped.size() && ident_char(stripped[i])) ++i;
        std::string key = stripped.substr(key_start, i - key_start);
        if (key.empty()) fail(source_name, line_no, "expected key");
        skip_ws(stripped, i);
        if (i >= stripped.size() || stripped[i] != '=')
            fail(source_name, line_no, "expected '=' after key '" + key + "'");
        ++i;

        // Multi-line arrays: keep appending lines until brackets balance
        // outside strings.
        std::string value_text = stripped.substr(i);
        auto balanced = [](const std::string& s) {
            int depth = 0;
            bool in_string = false;
            for (size_t j = 0; j < s.size(); ++j) {
                if (s[j] == '"' && (j == 0 || s[j - 1] != '\\')) in_string = !in_string;
                if (in_string) continue;
                if (s[j] == '[') ++depth;
                if (s[j] == ']') --depth;
            }
            return depth <= 0;
        };
        while (!balanced(value_text)) {
            if (!std::getline(in, raw))
                fail(source_name, line_no, "unterminated array for key '" + key + "'");
            ++line_no;
            if (!raw.empty() && raw.back() == '\r') raw.pop_back();
            value_text += ' ';
            value_text += strip_comment(raw);
        }

        ValueParser vp{source_name, line_no};
        size_t pos = 0;
        Value value = vp.parse(value_text, pos);
        skip_ws(value_text, pos);
        if (pos < value_text.size())
            fail(source_name, line_no, "trailing content after value for key '" + key + "'");

        std::string full = section.empty() ? key : section + "." + key;
        if (!table.emplace(full, std::move(value)).second)
            fail(source_name, line_no, "duplicate key '" + full + "'");
    }
    return table;
}

Table parse_toml_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config file " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_toml(text, path);
}

void apply_override(Table& table, const std::string& assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override must look like key=value, got '" + assignment + "'");
    std::string key = assignment.substr(0, eq);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    ValueParser vp{"--set " + key, 1};
    std::string value_text = assignment.substr(eq + 1);
    size_t pos = 0;
    Value v = vp.parse(value_text, pos);
    skip_ws(value_text, pos);
    if (pos < value_text.size())
        throw ConfigError("--set " + key + ": trailing content after value");
    table[key] = std::move(v);
}

namespace {

// Tracks which keys config_from_table consumed so leftovers can be reported
// as unknown (typos fail loudly instead of silently using defaults).
struct Reader {
    const Table& table;
    std::set<std::string> consumed;

    const Value* find(const std::string& key) {
        auto it = table.find(key);
        if (it == table.end()) return nullptr;
        consumed.insert(key);
        return &it->second;
    }

    [[noreturn]] void type_error(const std::string& key, const char* want,
                                 Value::Kind got) {
        throw ConfigError("config key '" + key + "' must be a " + want + ", got " +
                          kind_name(got));
    }

    std::string get_string(const std::string& key, const std::string& def) {
        const Value* v = find(key);
        if (!v) return def;
        if (v->kind != Value::Kind::string) type_error(key, "string", v->kind);
        return v->str;
    }

    int64_t get_int(const std::string& key, int64_t def) {
        const Value* v = find(key);
        if (!v) return def;
        if (v->kind != Value::Kind::integer) type_error(key, "integer", v->kind);
        return v->integer;
    }

    double get_double(const std::string& key, double def) {
        const Value* v = find(key);
        if (!v) return def;
        if (v->kind != Value::Kind::integer && v->kind != Value::Kind::real)
            type_error(key, "number", v->kind);
        return v->real;
    }

    bool has(const std::string& key) const { return table.count(key) != 0; }

    bool get_bool(const std::string& key, bool def) {
        const Value* v = find(key);
        if (!v) return def;
        if (v->kind != Value::Kind::boolean) type_error(key, "boolean", v->kind);
        return v->boolean;
    }

    std::vector<int64_t> get_int_array(const std::string& key, std::vector<int64_t> def) {
        const Value* v = find(key);
        if (!v) return def;
        if (v->kind != Value::Kind::array) type_error(key, "array", v->kind);
        std::vector<int64_t> out;
        for (const auto& e : v->array) {
            if (e.kind != Value::Kind::integer) type_error(key, "array of integers", e.kind);
            out.push_back(e.integer);
        }
        return out;
    }

    std::vector<std::string> get_string_array(const std::string& key,
                                              std::vector<std::string> def) {
        const Value* v = find(key);
        if (!v) return def;
        if (v->kind != Value::Kind::array) type_error(key, "array", v->kind);
        std::vector<std::string> out;
        for (const auto& e : v->array) {
            if (e.kind != Value::Kind::string) type_error(key, "array of strings", e.kind);
            out.push_back(e.str);
        }
        return out;
    }
};

void require_positive(double v, const std::string& key) {
    if (!(v > 0)) throw ConfigError("config key '" + key + "' must be positive");
}

} // namespace

int64_t parse_time(const Value& v, const std::string& key) {
    if (v.kind == Value::Kind::integer) return v.integer;
    if (v.kind != Value::Kind::string)
        throw ConfigError("config key '" + key +
                          "' must be unix seconds or \"YYYY-MM-DD[THH:MM:SS[Z]]\"");
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    int n = std::sscanf(v.str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d", &y, &mo, &d, &h, &mi, &s);
    if (n != 3 && n != 6)
        throw ConfigError("config key '" + key + "': cannot parse time '" + v.str + "'");
    std::tm tm{};
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = s;
    time_t t = timegm(&tm);
    if (t == time_t(-1))
        throw ConfigError("config key '" + key + "': time out of range '" + v.str + "'");
    return static_cast<int64_t>(t);
}

AuditConfig config_from_table(const Table& table) {
    Reader r{table, {}};
    AuditConfig cfg;

    int64_t seed = r.get_int("seed", 1729);
    if (seed < 0) throw ConfigError("config key 'seed' must be non-negative");
    cfg.seed = static_cast<uint64_t>(seed);
    cfg.output_dir = r.get_string("output_dir", cfg.output_dir);

    if (const Value* v = r.find("study.start")) cfg.study_start = parse_time(*v, "study.start");
    if (const Value* v = r.find("study.end")) cfg.study_end = parse_time(*v, "study.end");
    if (cfg.study_start && cfg.study_end && *cfg.study_start >= *cfg.study_end)
        throw ConfigError("study.start must precede study.end");

    cfg.min_pings = static_cast<uint64_t>(r.get_int("thresholds.min_pings", 30));
    cfg.max_pings = static_cast<uint64_t>(r.get_int("thresholds.max_pings", 100000));
    if (cfg.min_pings >= cfg.max_pings)
        throw ConfigError("thresholds.min_pings must be below thresholds.max_pings");
    cfg.min_tract_population =
        r.get_double("thresholds.min_tract_population", cfg.min_tract_population);
    cfg.min_users_per_tract = static_cast<size_t>(
        r.get_int("thresholds.min_users_per_tract", int64_t(cfg.min_users_per_tract)));
    cfg.stay_radius_m = r.get_double("thresholds.stay_radius_m", cfg.stay_radius_m);
    require_positive(cfg.stay_radius_m, "thresholds.stay_radius_m");
    cfg.stay_dwell_s = r.get_double("thresholds.stay_dwell_s", cfg.stay_dwell_s);
    require_positive(cfg.stay_dwell_s, "thresholds.stay_dwell_s");
    cfg.backbone_delta = r.get_double("thresholds.backbone_delta", cfg.backbone_delta);
    if (cfg.backbone_delta < 0)
        throw ConfigError("config key 'thresholds.backbone_delta' must be non-negative");
    cfg.night.start_hour = int(r.get_int("thresholds.night_start_hour", 22));
    cfg.night.end_hour = int(r.get_int("thresholds.night_end_hour", 6));
    for (auto [h, key] : {std::pair{cfg.night.start_hour, "thresholds.night_start_hour"},
                          std::pair{cfg.night.end_hour, "thresholds.night_end_hour"}})
        if (h < 0 || h > 23)
            throw ConfigError(std::string("config key '") + key + "' must be in [0,23]");
    cfg.min_edge_weight =
        static_cast<uint64_t>(r.get_int("thresholds.min_edge_weight", int64_t(cfg.min_edge_weight)));
    cfg.drop_self_loops = r.get_bool("networks.drop_self_loops", cfg.drop_self_loops);
    cfg.n_groups = static_cast<size_t>(r.get_int("thresholds.n_groups", 20));
    require_positive(double(cfg.n_groups), "thresholds.n_groups");
    cfg.top_share_fraction =
        r.get_double("thresholds.top_share_fraction", cfg.top_share_fraction);
    if (cfg.top_share_fraction <= 0 || cfg.top_share_fraction >= 1)
        throw ConfigError("config key 'thresholds.top_share_fraction' must be in (0,1)");

    cfg.features = r.get_string_array("model.features", {});
    for (const auto& f : cfg.features)
        census::tract_field(census::TractRecord{}, f); // throws on unknown names
    cfg.grid_trees = r.get_int_array("model.n_trees", cfg.grid_trees);
    cfg.grid_depth = r.get_int_array("model.max_depth", cfg.grid_depth);
    cfg.grid_leaf = r.get_int_array("model.min_leaf", cfg.grid_leaf);
    cfg.grid_subset = r.get_int_array("model.feature_subset", cfg.grid_subset);
    for (auto [list, key] :
         {std::pair{&cfg.grid_trees, "model.n_trees"}, {&cfg.grid_leaf, "model.min_leaf"}})
        for (int64_t v : *list)
            if (v <= 0) throw ConfigError(std::string("config key '") + key +
                                          "' entries must be positive");
    if (cfg.grid_trees.empty() || cfg.grid_depth.empty() || cfg.grid_leaf.empty())
        throw ConfigError("model grid lists must be non-empty");
    cfg.outer_folds = r.get_int("model.outer_folds", cfg.outer_folds);
    cfg.inner_folds = r.get_int("model.inner_folds", cfg.inner_folds);
    if (cfg.outer_folds < 2 || cfg.inner_folds < 2)
        throw ConfigError("model.outer_folds and model.inner_folds must be at least 2");

    // Cities: [city.<name>] sections, ACS tables under [city.<name>.acs].
    std::set<std::string> city_names;
    for (const auto& [key, value] : table) {
        if (key.rfind("city.", 0) != 0) continue;
        size_t dot = key.find('.', 5);
        if (dot == std::string::npos)
            throw ConfigError("config key '" + key + "' is not inside a [city.<name>]");
        city_names.insert(key.substr(5, dot - 5));
    }
    for (const auto& name : city_names) {
        CityConfig city;
        city.name = name;
        std::string base = "city." + name + ".";
        city.pings_path = r.get_string(base + "pings", "");
        if (city.pings_path.empty())
            throw ConfigError("config key '" + base + "pings' is required");
        city.boundaries_path = r.get_string(base + "boundaries", "");
        if (city.boundaries_path.empty())
            throw ConfigError("config key '" + base + "boundaries' is required");
        city.tz_offset_hours = r.get_double(base + "tz_offset_hours", 0.0);
        std::string acs_prefix = base + "acs.";
        for (const auto& [key, value] : table) {
            if (key.rfind(acs_prefix, 0) != 0) continue;
            std::string tbl = key.substr(acs_prefix.size());
            if (value.kind != Value::Kind::string)
                r.type_error(key, "string", value.kind);
            r.consumed.insert(key);
            city.acs_tables[tbl] = value.str;
        }
        if (city.acs_tables.empty())
            throw ConfigError("city '" + name + "' needs at least one [city." + name +
                              ".acs] table");
        cfg.cities[name] = std::move(city);
    }

    if (r.has("synth.n_tracts")) {
        synth::SynthConfig s;
        s.city_id = r.get_string("synth.city_id", s.city_id);
        s.n_tracts = size_t(r.get_int("synth.n_tracts", int64_t(s.n_tracts)));
        s.users_per_tract =
            size_t(r.get_int("synth.users_per_tract", int64_t(s.users_per_tract)));
        s.users_jitter = size_t(r.get_int("synth.users_jitter", int64_t(s.users_jitter)));
        s.study_days = int(r.get_int("synth.study_days", s.study_days));
        s.p_home = r.get_double("synth.p_home", s.p_home);
        s.gravity_exponent = r.get_double("synth.gravity_exponent", s.gravity_exponent);
        s.gravity_floor_km = r.get_double("synth.gravity_floor_km", s.gravity_floor_km);
        if (const Value* v = r.find("synth.start")) s.start_ts = parse_time(*v, "synth.start");
        s.tz_offset_hours = r.get_double("synth.tz_offset_hours", s.tz_offset_hours);
        s.state_county = r.get_string("synth.state_county", s.state_county);
        s.origin_lon = r.get_double("synth.origin_lon", s.origin_lon);
        s.origin_lat = r.get_double("synth.origin_lat", s.origin_lat);
        s.tract_size_deg = r.get_double("synth.tract_size_deg", s.tract_size_deg);
        s.effect.intercept = r.get_double("synth.intercept", s.effect.intercept);
        s.effect.sigma = r.get_double("synth.sigma", s.effect.sigma);
        for (const auto& [key, value] : table) {
            if (key.rfind("synth.coef.", 0) != 0) continue;
            std::string feature = key.substr(11);
            census::tract_field(census::TractRecord{}, feature); // throws on unknown
            if (value.kind != Value::Kind::integer && value.kind != Value::Kind::real)
                r.type_error(key, "number", value.kind);
            r.consumed.insert(key);
            s.effect.coef[feature] = value.real;
        }
        cfg.synth = std::move(s);
    }

    if (r.has("fetch.endpoint")) {
        FetchConfig f;
        f.endpoint = r.get_string("fetch.endpoint", "");
        f.year = r.get_int("fetch.year", f.year);
        f.tables = r.get_string_array("fetch.tables", {});
        f.state = r.get_string("fetch.state", "");
        f.counties = r.get_string_array("fetch.counties", {});
        f.cache_dir = r.get_string("fetch.cache_dir", f.cache_dir);
        if (f.tables.empty()) throw ConfigError("config key 'fetch.tables' is required");
        if (f.state.empty()) throw ConfigError("config key 'fetch.state' is required");
        cfg.fetch = std::move(f);
    }

    for (const auto& [key, value] : table)
        if (!r.consumed.count(key))
            throw ConfigError("unknown config key '" + key + "'");

    return cfg;
}

AuditConfig load_config(const std::string& path) {
    return config_from_table(parse_toml_file(path));
}

std::vector<model::Hyperparams> build_grid(const AuditConfig& cfg, size_t n_features) {
    std::vector<int64_t> subsets = cfg.grid_subset;
    if (subsets.empty()) {
        int64_t third = (int64_t(n_features) + 2) / 3;
        subsets = {third, int64_t(n_features)};
        if (subsets[0] == subsets[1]) subsets.pop_back();
    }
    std::vector<model::Hyperparams> grid;
    for (int64_t trees : cfg.grid_trees)
        for (int64_t depth : cfg.grid_depth)
            for (int64_t leaf : cfg.grid_leaf)
                for (int64_t subset : subsets) {
                    if (subset <= 0 || subset > int64_t(n_features))
                        throw ConfigError("model.feature_subset entries must be in [1, " +
                                          std::to_string(n_features) + "]");
                    model::Hyperparams hp;
                    hp.n_trees = int(trees);
                    hp.max_depth = depth < 0 ? -1 : int(depth);
                    hp.min_leaf = int(leaf);
                    hp.feature_subset = int(subset);
                    grid.push_back(hp);
                }
    return grid;
}

std::string canonical_dump(const Table& table) {
    std::string out;
    auto dump_value = [&](const Value& v, auto&& self) -> void {
        char buf[40];
        switch (v.kind) {
        case Value::Kind::string:
            out += '"';
            out += v.str;
            out += '"';
            break;
        case Value::Kind::integer:
            out += std::to_string(v.integer);
            break;
        case Value::Kind::real:
            std::snprintf(buf, sizeof buf, "%.17g", v.real);
            out += buf;
            break;
        case Value::Kind::boolean:
            out += v.boolean ? "true" : "false";
            break;
        case Value::Kind::array:
            out += '[';
            for (size_t i = 0; i < v.array.size(); ++i) {
                if (i) out += ',';
                self(v.array[i], self);
            }
            out += ']';
            break;
        }
    };
    for (const auto& [key, value] : table) {
        out += key;
        out += '=';
        dump_value(value, dump_value);
        out += '\n';
    }
    return out;
}

uint64_t config_hash(const Table& table) {
    std::string dump = canonical_dump(table);
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace mobaudit::config
