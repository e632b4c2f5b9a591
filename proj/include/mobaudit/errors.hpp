#pragma once

#include <stdexcept>
#include <string>

namespace mobaudit {

// Exit codes used by the CLI. Library code throws; the CLI maps to these.
enum class ExitCode : int {
    ok = 0,
    config_error = 2,
    data_error = 3,
    dependency_error = 4,
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing upstream artifact in a multi-stage run.
struct DependencyError : std::runtime_error {
    explicit DependencyError(const std::string& msg) : std::runtime_error(msg) {}
};

// Statistic requested on degenerate input (all-zero counts, zero variance).
struct UndefinedStatistic : std::runtime_error {
    explicit UndefinedStatistic(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace mobaudit
