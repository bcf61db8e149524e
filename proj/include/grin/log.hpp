#pragma once

#include <sstream>
#include <string>

namespace grin {

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Current level, read once from the GRIN_LOG environment variable
// (error|info|debug, default info).
LogLevel log_level();

void log_line(LogLevel level, const std::string& msg);

template <typename... Args>
void log_error(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  log_line(LogLevel::error, os.str());
}

template <typename... Args>
void log_info(Args&&... args) {
  if (log_level() < LogLevel::info) return;
  std::ostringstream os;
  (os << ... << args);
  log_line(LogLevel::info, os.str());
}

template <typename... Args>
void log_debug(Args&&... args) {
  if (log_level() < LogLevel::debug) return;
  std::ostringstream os;
  (os << ... << args);
  log_line(LogLevel::debug, os.str());
}

}  // namespace grin
