#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace det3d::log {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

/// Level comes from DET3D_LOG (error|warn|info|debug); default warn.
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("DET3D_LOG");
    if (env == nullptr) return Level::kWarn;
    const std::string value(env);
    if (value == "error") return Level::kError;
    if (value == "info") return Level::kInfo;
    if (value == "debug") return Level::kDebug;
    return Level::kWarn;
  }();
  return level;
}

inline void emit(Level level, const char* tag, const std::string& message) {
  if (level <= threshold()) {
    std::cerr << "[det3d " << tag << "] " << message << '\n';
  }
}

inline void error(const std::string& message) {
  emit(Level::kError, "error", message);
}
inline void warn(const std::string& message) {
  emit(Level::kWarn, "warn", message);
}
inline void info(const std::string& message) {
  emit(Level::kInfo, "info", message);
}
inline void debug(const std::string& message) {
  emit(Level::kDebug, "debug", message);
}

}  // namespace det3d::log
