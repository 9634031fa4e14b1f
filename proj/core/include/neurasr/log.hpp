#pragma once

#include <cstdlib>
#include <iostream>
#include <string_view>

namespace neurasr::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kOff = 3 };

// Threshold comes from NEURASR_LOG (debug|info|warn|off); default warn.
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("NEURASR_LOG");
    if (!env) return Level::kWarn;
    const std::string_view v(env);
    if (v == "debug") return Level::kDebug;
    if (v == "info") return Level::kInfo;
    if (v == "off") return Level::kOff;
    return Level::kWarn;
  }();
  return level;
}

inline bool enabled(Level level) { return level >= threshold(); }

template <typename... Args>
void write(Level level, const Args&... args) {
  if (!enabled(level)) return;
  static constexpr const char* kTags[] = {"[debug] ", "[info] ", "[warn] ", ""};
  std::cerr << kTags[static_cast<int>(level)];
  (std::cerr << ... << args);
  std::cerr << '\n';
}

template <typename... Args>
void debug(const Args&... args) { write(Level::kDebug, args...); }
template <typename... Args>
void info(const Args&... args) { write(Level::kInfo, args...); }
template <typename... Args>
void warn(const Args&... args) { write(Level::kWarn, args...); }

}  // namespace neurasr::log
