#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace fedrad::log {

// Logger writing to stderr; level taken from FEDRAD_LOG (error|warn|info|debug), default warn.
inline std::shared_ptr<spdlog::logger> get() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = std::make_shared<spdlog::logger>("fedrad", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_pattern("[%l] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("FEDRAD_LOG")) {
      const std::string s(env);
      if (s == "error") level = spdlog::level::err;
      else if (s == "warn") level = spdlog::level::warn;
      else if (s == "info") level = spdlog::level::info;
      else if (s == "debug") level = spdlog::level::debug;
    }
    l->set_level(level);
    return l;
  }();
  return logger;
}

template <typename... Args>
void info(fmt::format_string<Args...> fmt, Args&&... args) {
  get()->info(fmt, std::forward<Args>(args)...);
}
template <typename... Args>
void warn(fmt::format_string<Args...> fmt, Args&&... args) {
  get()->warn(fmt, std::forward<Args>(args)...);
}
template <typename... Args>
void debug(fmt::format_string<Args...> fmt, Args&&... args) {
  get()->debug(fmt, std::forward<Args>(args)...);
}
template <typename... Args>
void error(fmt::format_string<Args...> fmt, Args&&... args) {
  get()->error(fmt, std::forward<Args>(args)...);
}

}  // namespace fedrad::log
