#include "qcs/logging.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/spdlog.h>

namespace qcs {

namespace {

std::string_view env_level() {
  const char* raw = std::getenv("QCS_LOG_LEVEL");
  return raw ? std::string_view(raw) : std::string_view();
}

}  // namespace

void configure_logging_from_env() {
  const auto level = env_level();
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    if (!level.empty() && level != "warn") {
      spdlog::warn("ignoring unknown QCS_LOG_LEVEL '{}'", level);
    }
    spdlog::set_level(spdlog::level::warn);
  }
}

bool debug_checks_enabled() { return env_level() == "debug"; }

}  // namespace qcs
