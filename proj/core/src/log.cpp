#include "capstream/log.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace capstream {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto lg = spdlog::stderr_color_mt("capstream");
    lg->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("CAPSTREAM_LOG")) {
      level = spdlog::level::from_str(env);
    }
    lg->set_level(level);
    return lg;
  }();
  return instance;
}

}  // namespace capstream
