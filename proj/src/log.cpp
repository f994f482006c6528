#include "coevo/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace coevo::log {

void set_level(std::string_view level) {
  spdlog::set_level(spdlog::level::from_str(std::string(level)));
}

void configure_from_env() {
  static bool configured = false;
  if (!configured) {
    // Logs go to stderr so stdout stays machine-readable.
    spdlog::set_default_logger(spdlog::stderr_color_mt("coevo"));
    spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    configured = true;
  }
  const char* env = std::getenv("COEVO_LOG");
  set_level(env && *env ? env : "warn");
}

}  // namespace coevo::log
