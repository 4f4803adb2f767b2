#pragma once

// Leveled logging to stderr, controlled by the BMGF_LOG environment
// variable: debug | info | warn | error | off. Default: info.

#include <cstdio>
#include <cstdlib>
#include <string>

namespace bmgf::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

inline Level& threshold() {
    static Level lvl = [] {
        const char* env = std::getenv("BMGF_LOG");
        if (!env) return Level::info;
        std::string s(env);
        if (s == "debug") return Level::debug;
        if (s == "info") return Level::info;
        if (s == "warn" || s == "warning") return Level::warn;
        if (s == "error") return Level::error;
        if (s == "off" || s == "none") return Level::off;
        return Level::info;
    }();
    return lvl;
}

inline void write(Level lvl, const char* tag, const std::string& msg) {
    if (lvl < threshold()) return;
    std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
    std::fflush(stderr);
}

inline void debug(const std::string& msg) { write(Level::debug, "debug", msg); }
inline void info(const std::string& msg) { write(Level::info, "info", msg); }
inline void warn(const std::string& msg) { write(Level::warn, "warn", msg); }
inline void error(const std::string& msg) { write(Level::error, "error", msg); }

}  // namespace bmgf::log
