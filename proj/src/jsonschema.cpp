#include "mobaudit/jsonschema.hpp"

#include <fstream>
#include <set>

#include "mobaudit/errors.hpp"

namespace mobaudit::jsonschema {
namespace {

using nlohmann::json;

// Keywords we understand; anything else in a schema object is a sign the
// schema outgrew the validator, and silently ignoring it would let invalid
// reports through.
const std::set<std::string> kKnown = {
    "$schema", "$id",      "title",   "description",          "type",
    "properties", "required", "additionalProperties", "items", "enum",
    "minimum", "maximum",  "minItems", "maxItems",
};

bool type_matches(const json& v, const std::string& t) {
    if (t == "string") return v.is_string();
    if (t == "number") return v.is_number();
    if (t == "integer") return v.is_number_integer();
    if (t == "boolean") return v.is_boolean();
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "null") return v.is_null();
    throw ConfigError("schema type '" + t + "' is not supported");
}

std::string type_name(const json& v) {
    if (v.is_string()) return "string";
    if (v.is_number_integer()) return "integer";
    if (v.is_number()) return "number";
    if (v.is_boolean()) return "boolean";
    if (v.is_object()) return "object";
    if (v.is_array()) return "array";
    return "null";
}

void check(const json& doc, const json& schema, const std::string& path,
           std::vector<std::string>& errors) {
    if (!schema.is_object())
        throw ConfigError("schema node at " + path + " must be an object");
    for (auto it = schema.begin(); it != schema.end(); ++it)
        if (!kKnown.count(it.key()))
            throw ConfigError("schema keyword '" + it.key() + "' at " + path +
                              " is not supported");

    if (auto it = schema.find("type"); it != schema.end()) {
        bool ok = false;
        if (it->is_array()) {
            for (const auto& t : *it) ok = ok || type_matches(doc, t.get<std::string>());
        } else {
            ok = type_matches(doc, it->get<std::string>());
        }
        if (!ok) {
            errors.push_back(path + ": expected type " + it->dump() + ", got " +
                             type_name(doc));
            return; // structural checks below would just cascade
        }
    }

    if (auto it = schema.find("enum"); it != schema.end()) {
        bool ok = false;
        for (const auto& allowed : *it) ok = ok || doc == allowed;
        if (!ok) errors.push_back(path + ": value " + doc.dump() + " not in enum");
    }

    if (doc.is_number()) {
        if (auto it = schema.find("minimum"); it != schema.end())
            if (doc.get<double>() < it->get<double>())
                errors.push_back(path + ": " + doc.dump() + " below minimum " + it->dump());
        if (auto it = schema.find("maximum"); it != schema.end())
            if (doc.get<double>() > it->get<double>())
                errors.push_back(path + ": " + doc.dump() + " above maximum " + it->dump());
    }

    if (doc.is_object()) {
        const json* props = nullptr;
        if (auto it = schema.find("properties"); it != schema.end()) props = &*it;
        if (auto it = schema.find("required"); it != schema.end())
            for (const auto& name : *it)
                if (!doc.contains(name.get<std::string>()))
                    errors.push_back(path + ": missing required property '" +
                                     name.get<std::string>() + "'");
        bool allow_extra = true;
        if (auto it = schema.find("additionalProperties"); it != schema.end())
            allow_extra = it->get<bool>();
        for (auto it = doc.begin(); it != doc.end(); ++it) {
            const json* sub = nullptr;
            if (props && props->contains(it.key())) sub = &props->at(it.key());
            if (sub)
                check(it.value(), *sub, path + "." + it.key(), errors);
            else if (!allow_extra)
                errors.push_back(path + ": unexpected property '" + it.key() + "'");
        }
    }

    if (doc.is_array()) {
        if (auto it = schema.find("minItems"); it != schema.end())
            if (doc.size() < it->get<size_t>())
                errors.push_back(path + ": has " + std::to_string(doc.size()) +
                                 " items, fewer than minItems " + it->dump());
        if (auto it = schema.find("maxItems"); it != schema.end())
            if (doc.size() > it->get<size_t>())
                errors.push_back(path + ": has " + std::to_string(doc.size()) +
                                 " items, more than maxItems " + it->dump());
        if (auto it = schema.find("items"); it != schema.end())
            for (size_t i = 0; i < doc.size(); ++i)
                check(doc[i], *it, path + "[" + std::to_string(i) + "]", errors);
    }
}

json load(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw IoError(std::string("cannot open ") + what + " '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw DataError(std::string(what) + " '" + path + "' is not valid JSON: " + e.what());
    }
    return j;
}

} // namespace

std::vector<std::string> validate(const json& doc, const json& schema) {
    std::vector<std::string> errors;
    check(doc, schema, "$", errors);
    return errors;
}

std::vector<std::string> validate_file(const std::string& doc_path,
                                       const std::string& schema_path) {
    return validate(load(doc_path, "document"), load(schema_path, "schema"));
}

} // namespace mobaudit::jsonschema
