#include "icred/log.hpp"

#include <cstdlib>
#include <iostream>

namespace icred {

namespace {
LogLevel initial_level() {
  const char* env = std::getenv("ICRED_LOG");
  if (!env) return LogLevel::kInfo;
  std::string s(env);
  if (s == "error") return LogLevel::kError;
  if (s == "debug") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

LogLevel& level_ref() {
  static LogLevel level = initial_level();
  return level;
}
}  // namespace

LogLevel log_level() { return level_ref(); }
void set_log_level(LogLevel level) { level_ref() = level; }

void log_message(LogLevel level, const std::string& msg) {
  static const char* names[] = {"error", "info", "debug"};
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

}  // namespace icred
