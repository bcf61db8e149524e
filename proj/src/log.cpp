#include "grin/log.hpp"

#include <cstdlib>
#include <cstring>
#include <iostream>

namespace grin {

static LogLevel parse_level() {
  const char* env = std::getenv("GRIN_LOG");
  if (env == nullptr) return LogLevel::info;
  if (std::strcmp(env, "error") == 0) return LogLevel::error;
  if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
  return LogLevel::info;
}

LogLevel log_level() {
  static const LogLevel level = parse_level();
  return level;
}

void log_line(LogLevel level, const std::string& msg) {
  const char* tag = level == LogLevel::error ? "error" : level == LogLevel::debug ? "debug" : "info";
  std::cerr << "[grin:" << tag << "] " << msg << '\n';
}

}  // namespace grin
