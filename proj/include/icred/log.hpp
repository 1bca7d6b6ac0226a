#pragma once

#include <sstream>
#include <string>

namespace icred {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

/// Current level; initialized from ICRED_LOG (error|info|debug), default info.
LogLevel log_level();
void set_log_level(LogLevel level);

void log_message(LogLevel level, const std::string& msg);

template <typename... Args>
void log_at(LogLevel level, Args&&... args) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  std::ostringstream os;
  (os << ... << args);
  log_message(level, os.str());
}

template <typename... Args>
void log_error(Args&&... args) {
  log_at(LogLevel::kError, std::forward<Args>(args)...);
}
template <typename... Args>
void log_info(Args&&... args) {
  log_at(LogLevel::kInfo, std::forward<Args>(args)...);
}
template <typename... Args>
void log_debug(Args&&... args) {
  log_at(LogLevel::kDebug, std::forward<Args>(args)...);
}

}  // namespace icred
