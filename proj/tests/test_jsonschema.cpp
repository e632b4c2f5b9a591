#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "mobaudit/errors.hpp"
#include "mobaudit/jsonschema.hpp"
#include "mobaudit/pipeline.hpp"

using namespace mobaudit;
using nlohmann::json;

TEST_CASE("validate: types, enum, ranges") {
    json schema = json::parse(R"({
        "type": "object",
        "additionalProperties": false,
        "required": ["name", "score"],
        "properties": {
            "name": {"type": "string"},
            "score": {"type": "number", "minimum": 0, "maximum": 1},
            "kind": {"enum": ["a", "b"]},
            "tags": {"type": "array", "minItems": 1, "items": {"type": "string"}},
            "extra": {"type": ["number", "null"]}
        }
    })");

    CHECK(jsonschema::validate(json{{"name", "x"}, {"score", 0.5}}, schema).empty());
    CHECK(jsonschema::validate(json{{"name", "x"}, {"score", 0.5}, {"extra", nullptr}},
                               schema)
              .empty());
    CHECK(jsonschema::validate(
              json{{"name", "x"}, {"score", 1.0}, {"kind", "b"}, {"tags", {"t"}}}, schema)
              .empty());

    auto errs = jsonschema::validate(json{{"score", 2.0}}, schema);
    REQUIRE(errs.size() == 2); // missing name, score above maximum
    CHECK(errs[0].find("required property 'name'") != std::string::npos);
    CHECK(errs[1].find("above maximum") != std::string::npos);

    errs = jsonschema::validate(json{{"name", 3}, {"score", 0.0}}, schema);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].find("$.name") != std::string::npos);
    CHECK(errs[0].find("expected type") != std::string::npos);

    errs = jsonschema::validate(json{{"name", "x"}, {"score", 0.0}, {"bogus", 1}}, schema);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].find("unexpected property 'bogus'") != std::string::npos);

    errs = jsonschema::validate(
        json{{"name", "x"}, {"score", 0.0}, {"tags", json::array()}}, schema);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].find("minItems") != std::string::npos);

    errs = jsonschema::validate(json{{"name", "x"}, {"score", 0.0}, {"kind", "c"}}, schema);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].find("not in enum") != std::string::npos);

    errs = jsonschema::validate(
        json{{"name", "x"}, {"score", 0.0}, {"tags", {"ok", 7}}}, schema);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].find("$.tags[1]") != std::string::npos);
}

TEST_CASE("validate: nested paths and integer vs number") {
    json schema = json::parse(R"({
        "type": "object",
        "properties": {
            "inner": {
                "type": "object",
                "properties": {"n": {"type": "integer", "minimum": 3}}
            }
        }
    })");
    CHECK(jsonschema::validate(json{{"inner", {{"n", 3}}}}, schema).empty());

    auto errs = jsonschema::validate(json{{"inner", {{"n", 2.5}}}}, schema);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].find("$.inner.n") != std::string::npos);

    errs = jsonschema::validate(json{{"inner", {{"n", 2}}}}, schema);
    REQUIRE(errs.size() == 1);
    CHECK(errs[0].find("below minimum") != std::string::npos);
}

TEST_CASE("validate: unsupported schema keywords are loud") {
    CHECK_THROWS_AS(jsonschema::validate(json::object(),
                                         json::parse(R"({"$ref": "#/nope"})")),
                    ConfigError);
    CHECK_THROWS_AS(jsonschema::validate(json::object(),
                                         json::parse(R"({"type": "nonsense"})")),
                    ConfigError);
}

TEST_CASE("shipped report schema matches the built-in copy") {
    std::ifstream in(MOBAUDIT_SOURCE_DIR "/schemas/report.schema.json");
    REQUIRE(in.good());
    json shipped;
    in >> shipped;
    CHECK(shipped == pipeline::report_schema());
}
