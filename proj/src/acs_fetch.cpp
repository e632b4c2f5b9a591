#include "mobaudit/acs_fetch.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "mobaudit/errors.hpp"

namespace mobaudit::census {

namespace {

void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
        s.replace(pos, from.size(), to);
}

// "http://host:port/path?query" -> (origin, path-with-query)
std::pair<std::string, std::string> split_url(const std::string& url) {
    size_t scheme = url.find("://");
    if (scheme == std::string::npos)
        throw ConfigError("fetch.endpoint must be an http URL, got '" + url + "'");
    size_t path = url.find('/', scheme + 3);
    if (path == std::string::npos) return {url, "/"};
    return {url.substr(0, path), url.substr(path)};
}

} // namespace

std::string expand_endpoint(const std::string& endpoint, int64_t year,
                            const std::string& table, const std::string& state,
                            const std::vector<std::string>& counties) {
    std::string url = endpoint;
    replace_all(url, "{year}", std::to_string(year));
    replace_all(url, "{table}", table);
    replace_all(url, "{state}", state);
    std::string joined;
    for (const auto& c : counties) {
        if (!joined.empty()) joined += ',';
        joined += c;
    }
    replace_all(url, "{counties}", joined);
    return url;
}

FetchResult fetch_acs(const config::FetchConfig& spec, int max_retries,
                      int initial_backoff_ms) {
    std::filesystem::create_directories(spec.cache_dir);
    FetchResult result;

    for (const auto& table : spec.tables) {
        std::string cached = spec.cache_dir + "/" + std::to_string(spec.year) + "_" +
                             spec.state + "_" + table + ".csv";
        if (std::filesystem::exists(cached)) {
            ++result.from_cache;
            result.table_paths[table] = cached;
            continue;
        }

        std::string url =
            expand_endpoint(spec.endpoint, spec.year, table, spec.state, spec.counties);
        auto [origin, path] = split_url(url);
        httplib::Client client(origin);
        client.set_connection_timeout(10);
        client.set_read_timeout(30);

        std::string body;
        int backoff = initial_backoff_ms;
        for (int attempt = 0;; ++attempt) {
            auto res = client.Get(path);
            if (res && res->status == 200) {
                body = res->body;
                break;
            }
            if (res && res->status == 404)
                throw DataError("ACS table '" + table + "' not found (HTTP 404) at " + url);
            if (attempt >= max_retries) {
                std::string detail = res ? "HTTP " + std::to_string(res->status)
                                         : "transport error " + httplib::to_string(res.error());
                throw DependencyError("fetching ACS table '" + table + "' failed after " +
                                      std::to_string(attempt + 1) + " attempts (" + detail +
                                      ") at " + url);
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }

        // The loader will parse properly; here we only reject bodies that
        // cannot possibly be a CSV table.
        if (body.empty() || body.find('\n') == std::string::npos ||
            body.substr(0, body.find('\n')).find(',') == std::string::npos)
            throw DataError("ACS table '" + table + "' returned a malformed payload at " +
                            url);

        // Write then rename so a crash never leaves a half-written cache
        // entry to be mistaken for a hit.
        std::string tmp = cached + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw IoError("cannot write " + tmp);
            out.write(body.data(), std::streamsize(body.size()));
        }
        std::filesystem::rename(tmp, cached);
        ++result.fetched;
        result.table_paths[table] = cached;
    }
    return result;
}

} // namespace mobaudit::census
