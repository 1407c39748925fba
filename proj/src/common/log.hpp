#pragma once

#include <string_view>

namespace lidarsphere::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

// Initial level comes from LIDARSPHERE_LOG (debug|info|warn|error|off); default warn.
Level level();
void set_level(Level level);

void write(Level level, std::string_view message);

inline void debug(std::string_view m) { write(Level::kDebug, m); }
inline void info(std::string_view m) { write(Level::kInfo, m); }
inline void warn(std::string_view m) { write(Level::kWarn, m); }

}  // namespace lidarsphere::log
