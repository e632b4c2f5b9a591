#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>

#include <httplib.h>

#include "mobaudit/acs_fetch.hpp"
#include "mobaudit/errors.hpp"

using namespace mobaudit;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::string kGolden =
    "GEO_ID,NAME,S0101_C01_001E\n"
    "1400000US36047000100,Census Tract 1,3200\n"
    "1400000US36047000200,Census Tract 2,2100\n";

// Loopback ACS stand-in serving recorded responses.
struct FakeApi {
    httplib::Server server;
    int port = 0;
    std::thread thread;
    std::atomic<int> requests{0};
    std::atomic<int> failures_left{0};

    FakeApi() {
        server.Get("/acs", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests;
            if (failures_left.fetch_sub(1) > 0) {
                res.status = 500;
                return;
            }
            failures_left = 0;
            auto table = req.get_param_value("table");
            if (table == "S0101") {
                res.set_content(kGolden, "text/csv");
            } else if (table == "EMPTY") {
                res.set_content("", "text/csv");
            } else {
                res.status = 404;
            }
        });
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~FakeApi() {
        server.stop();
        thread.join();
    }

    config::FetchConfig spec(const std::string& cache_dir) const {
        config::FetchConfig f;
        f.endpoint = "http://127.0.0.1:" + std::to_string(port) +
                     "/acs?year={year}&table={table}&state={state}&counties={counties}";
        f.year = 2019;
        f.tables = {"S0101"};
        f.state = "36";
        f.counties = {"047", "061"};
        f.cache_dir = cache_dir;
        return f;
    }
};

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() / name;
        std::filesystem::remove_all(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str() const { return path.string(); }
};

} // namespace

TEST_CASE("expand_endpoint: placeholder substitution") {
    auto url = census::expand_endpoint("http://h/{year}/{table}?in={state}:{counties}",
                                       2019, "S1701", "36", {"047", "061"});
    CHECK(url == "http://h/2019/S1701?in=36:047,061");
}

TEST_CASE("fetch_acs: golden bytes, then cache short-circuits the network") {
    FakeApi api;
    TempDir cache("acs_cache_test");

    auto first = census::fetch_acs(api.spec(cache.str()));
    REQUIRE(first.table_paths.count("S0101"));
    CHECK(first.fetched == 1);
    CHECK(first.from_cache == 0);
    CHECK(slurp(first.table_paths.at("S0101")) == kGolden);
    CHECK(api.requests == 1);

    auto second = census::fetch_acs(api.spec(cache.str()));
    CHECK(second.fetched == 0);
    CHECK(second.from_cache == 1);
    CHECK(api.requests == 1); // untouched
    CHECK(slurp(second.table_paths.at("S0101")) == kGolden);
}

TEST_CASE("fetch_acs: 404 names the missing table") {
    FakeApi api;
    TempDir cache("acs_cache_404");
    auto spec = api.spec(cache.str());
    spec.tables = {"NOPE"};
    try {
        census::fetch_acs(spec);
        FAIL_CHECK("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("NOPE") != std::string::npos);
        CHECK(std::string(e.what()).find("404") != std::string::npos);
    }
}

TEST_CASE("fetch_acs: transient failures retry with backoff, then succeed") {
    FakeApi api;
    TempDir cache("acs_cache_retry");
    api.failures_left = 2;
    auto result = census::fetch_acs(api.spec(cache.str()), 3, 1);
    CHECK(result.fetched == 1);
    CHECK(api.requests == 3); // two 500s, one success
    CHECK(slurp(result.table_paths.at("S0101")) == kGolden);
}

TEST_CASE("fetch_acs: persistent failure raises a dependency error") {
    FakeApi api;
    TempDir cache("acs_cache_down");
    api.failures_left = 100;
    CHECK_THROWS_AS(census::fetch_acs(api.spec(cache.str()), 2, 1), DependencyError);
    CHECK(api.requests == 3); // initial try + 2 retries
}

TEST_CASE("fetch_acs: empty payload is rejected, not cached") {
    FakeApi api;
    TempDir cache("acs_cache_empty");
    auto spec = api.spec(cache.str());
    spec.tables = {"EMPTY"};
    CHECK_THROWS_AS(census::fetch_acs(spec), DataError);
    CHECK(!std::filesystem::exists(cache.str() + "/2019_36_EMPTY.csv"));
}
