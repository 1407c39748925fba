#include "common/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace lidarsphere::log {
namespace {

Level parse_env() {
  const char* env = std::getenv("LIDARSPHERE_LOG");
  if (env == nullptr) return Level::kWarn;
  const std::string v(env);
  if (v == "debug") return Level::kDebug;
  if (v == "info") return Level::kInfo;
  if (v == "warn") return Level::kWarn;
  if (v == "error") return Level::kError;
  if (v == "off") return Level::kOff;
  return Level::kWarn;
}

std::atomic<int>& current() {
  static std::atomic<int> lvl{static_cast<int>(parse_env())};
  return lvl;
}

constexpr std::string_view tag(Level l) {
  switch (l) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
    default: return "";
  }
}

}  // namespace

Level level() { return static_cast<Level>(current().load()); }
void set_level(Level l) { current().store(static_cast<int>(l)); }

void write(Level l, std::string_view message) {
  if (static_cast<int>(l) < current().load() || l == Level::kOff) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "[lidarsphere " << tag(l) << "] " << message << '\n';
}

}  // namespace lidarsphere::log
