#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace damt {

// Malformed or truncated file content (DVOL headers, config files, ...).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint payload does not match its manifest hash.
class CorruptionError : public std::runtime_error {
public:
    explicit CorruptionError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class LogLevel { Debug = 0, Info = 1, Warn = 2 };

// DAMT_LOG_LEVEL in {debug, info, warn}; controls verbosity only.
inline LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("DAMT_LOG_LEVEL");
        if (env) {
            std::string s(env);
            if (s == "debug") return LogLevel::Debug;
            if (s == "warn") return LogLevel::Warn;
        }
        return LogLevel::Info;
    }();
    return level;
}

template <typename... Args>
void log_at(LogLevel lvl, const char* fmt, Args... args) {
    if (lvl < log_level()) return;
    const char* tag = lvl == LogLevel::Debug ? "debug" : (lvl == LogLevel::Info ? "info" : "warn");
    std::fprintf(stderr, "[%s] ", tag);
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
}

inline void log_info(const char* msg) { log_at(LogLevel::Info, "%s", msg); }
inline void log_warn(const char* msg) { log_at(LogLevel::Warn, "%s", msg); }

}  // namespace damt
