#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace fnl::log {

enum class Level : int { Off = 0, Error = 1, Info = 2, Debug = 3 };

// Verbosity is controlled by the FNL_LOG environment variable
// (off|error|info|debug); default is error.
inline Level level() {
    static const Level lvl = [] {
        const char* e = std::getenv("FNL_LOG");
        if (!e) return Level::Error;
        const std::string s(e);
        if (s == "off") return Level::Off;
        if (s == "info") return Level::Info;
        if (s == "debug") return Level::Debug;
        return Level::Error;
    }();
    return lvl;
}

template <typename... Args>
void write(Level at, const char* tag, const char* fmt, Args... args) {
    if (static_cast<int>(level()) < static_cast<int>(at)) return;
    std::fprintf(stderr, "[fnlab %s] ", tag);
    std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
}

template <typename... Args>
void error(const char* fmt, Args... args) {
    write(Level::Error, "error", fmt, args...);
}
template <typename... Args>
void info(const char* fmt, Args... args) {
    write(Level::Info, "info", fmt, args...);
}
template <typename... Args>
void debug(const char* fmt, Args... args) {
    write(Level::Debug, "debug", fmt, args...);
}

} // namespace fnl::log
