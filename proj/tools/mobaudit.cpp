// Command-line front end: maps subcommands onto pipeline stages, applies
// --set overrides on top of the config file, and turns the library's typed
// exceptions into the documented exit codes (0 ok, 2 config, 3 data, 4
// missing dependency).

#include <chrono>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mobaudit/config.hpp"
#include "mobaudit/errors.hpp"
#include "mobaudit/pipeline.hpp"

namespace {

using mobaudit::ExitCode;

int64_t unix_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

struct Cli {
    std::string config_path;
    std::vector<std::string> overrides;
    bool plots = false;
};

mobaudit::pipeline::Runner make_runner(const Cli& cli) {
    auto table = mobaudit::config::parse_toml_file(cli.config_path);
    for (const auto& assignment : cli.overrides)
        mobaudit::config::apply_override(table, assignment);
    mobaudit::pipeline::Runner runner;
    runner.cfg = mobaudit::config::config_from_table(table);
    runner.cfg_hash = mobaudit::config::config_hash(table);
    runner.config_path = cli.config_path;
    runner.plots = cli.plots;
    return runner;
}

int run_stages(const Cli& cli, const std::vector<std::string>& stages) {
    int64_t started = unix_now();
    auto runner = make_runner(cli);
    for (const auto& stage : stages) {
        if (stage == "synth") runner.synth();
        else if (stage == "fetch") runner.fetch();
        else if (stage == "ingest") runner.ingest();
        else if (stage == "audit") runner.audit();
        else if (stage == "networks") runner.networks();
        else if (stage == "model") runner.model();
        else if (stage == "shap") runner.shap();
        else if (stage == "report") runner.report();
    }
    runner.write_metadata(started, unix_now());
    for (const auto& t : runner.timings)
        std::fprintf(stderr, "%-8s %-12s %8.2fs\n", t.stage.c_str(), t.city.c_str(),
                     t.seconds);
    return int(ExitCode::ok);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bias audit for GPS mobility data"};
    app.require_subcommand(1);

    Cli cli;
    app.add_option("-c,--config", cli.config_path, "TOML config file")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--set", cli.overrides,
                   "override a config key, e.g. --set seed=7 or --set "
                   "thresholds.min_pings=50 (repeatable)");
    app.add_flag("--plots", cli.plots, "also write SVG plots (Lorenz, beeswarm)");

    // Stage subcommands share the global options; each runs one stage except
    // `run`, which executes the full chain.
    std::vector<std::pair<const char*, const char*>> stages = {
        {"synth", "generate the synthetic fixture from the [synth] section"},
        {"fetch", "download and cache ACS tables from the [fetch] section"},
        {"ingest", "parse pings and infer home locations"},
        {"audit", "filter users and compute production inequality"},
        {"networks", "build per-group mobility networks and backbones"},
        {"model", "fit production models under nested cross-validation"},
        {"shap", "attribute model predictions to demographic features"},
        {"report", "compose the per-city summary report"},
    };
    // fallthrough lets the shared options appear after the stage name too
    // (`mobaudit run -c audit.toml`), which is how people actually type it.
    for (const auto& [name, desc] : stages) app.add_subcommand(name, desc)->fallthrough();
    app.add_subcommand("run", "ingest through report, in order")->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // CLI11's own exit codes don't match ours: help is success, anything
        // else is a config problem.
        int code = app.exit(e);
        return code == 0 ? 0 : int(ExitCode::config_error);
    }

    std::vector<std::string> to_run;
    for (const auto* sub : app.get_subcommands()) {
        if (sub->get_name() == "run")
            to_run = {"ingest", "audit", "networks", "model", "shap", "report"};
        else
            to_run.push_back(sub->get_name());
    }

    try {
        return run_stages(cli, to_run);
    } catch (const mobaudit::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return int(ExitCode::config_error);
    } catch (const mobaudit::DependencyError& e) {
        std::fprintf(stderr, "dependency error: %s\n", e.what());
        return int(ExitCode::dependency_error);
    } catch (const mobaudit::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return int(ExitCode::data_error);
    } catch (const mobaudit::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return int(ExitCode::data_error);
    } catch (const mobaudit::UndefinedStatistic& e) {
        std::fprintf(stderr, "undefined statistic: %s\n", e.what());
        return int(ExitCode::data_error);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return int(ExitCode::data_error);
    }
}
