#include "mdms/log.hpp"

#include <chrono>
#include <iostream>
#include <mutex>

#include "mdms/time.hpp"

namespace mdms::log {

namespace {
std::mutex g_mutex;
Level g_threshold = Level::Info;

const char* level_name(Level level) {
    switch (level) {
        case Level::Debug: return "debug";
        case Level::Info: return "info";
        case Level::Warn: return "warn";
        case Level::Error: return "error";
    }
    return "?";
}

// Quote values containing spaces or quotes so lines stay machine-splittable.
std::string quote(std::string_view value) {
    if (value.find_first_of(" \"=") == std::string_view::npos && !value.empty()) {
        return std::string(value);
    }
    std::string out = "\"";
    for (const char c : value) {
        if (c == '"' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    out += '"';
    return out;
}
}  // namespace

void set_level(Level level) {
    std::lock_guard lock(g_mutex);
    g_threshold = level;
}

void write(Level level, std::string_view message, std::initializer_list<Field> fields) {
    std::lock_guard lock(g_mutex);
    if (level < g_threshold) {
        return;
    }
    const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    std::string line = "ts=" + format_timestamp(now) + " level=" + level_name(level) +
                       " msg=" + quote(message);
    for (const auto& [key, value] : fields) {
        line += ' ';
        line += key;
        line += '=';
        line += quote(value);
    }
    std::cerr << line << '\n';
}

}  // namespace mdms::log
