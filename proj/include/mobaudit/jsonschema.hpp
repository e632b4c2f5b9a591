#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mobaudit::jsonschema {

// Validates a document against the subset of JSON Schema draft-07 the report
// schema uses: type (string or list), properties, required,
// additionalProperties (boolean form), items (single schema), enum,
// minimum/maximum, minItems/maxItems. No $ref, no combinators. Returns one
// "$.path: message" line per violation; empty means valid.
std::vector<std::string> validate(const nlohmann::json& doc, const nlohmann::json& schema);

// Same, loading the schema from disk; throws IoError when unreadable and
// ConfigError when the schema itself uses unsupported keywords.
std::vector<std::string> validate_file(const std::string& doc_path,
                                       const std::string& schema_path);

} // namespace mobaudit::jsonschema
