#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

// Minimal leveled logging to stderr. The threshold comes from the BCNET_LOG
// environment variable (error | info | debug) unless set explicitly.

namespace bcnet::logging {

enum class level { error = 0, warn = 1, info = 2, debug = 3 };

inline level parse_level(std::string_view name, level fallback = level::info) {
  if (name == "error") return level::error;
  if (name == "warn" || name == "warning") return level::warn;
  if (name == "info") return level::info;
  if (name == "debug") return level::debug;
  return fallback;
}

inline level& threshold() {
  static level current = [] {
    const char* env = std::getenv("BCNET_LOG");
    return env ? parse_level(env) : level::info;
  }();
  return current;
}

inline void set_level(level l) { threshold() = l; }

inline void write(level l, std::string_view tag, const std::string& message) {
  if (static_cast<int>(l) > static_cast<int>(threshold())) return;
  static std::mutex guard;
  std::lock_guard lock(guard);
  std::cerr << "[bcnet " << tag << "] " << message << '\n';
}

inline void error(const std::string& m) { write(level::error, "error", m); }
inline void warn(const std::string& m) { write(level::warn, "warn", m); }
inline void info(const std::string& m) { write(level::info, "info", m); }
inline void debug(const std::string& m) { write(level::debug, "debug", m); }

}  // namespace bcnet::logging
