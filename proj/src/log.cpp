#include "crlmesh/log.hpp"

#include <cstdlib>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace crlmesh::log {

void init_from_env() {
  static bool done = false;
  if (done) return;
  done = true;
  auto logger = spdlog::stderr_color_mt("crlmesh");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  const char* env = std::getenv("CRLMESH_LOG");
  if (!env) return;
  std::string_view v(env);
  if (v == "error")
    spdlog::set_level(spdlog::level::err);
  else if (v == "debug")
    spdlog::set_level(spdlog::level::debug);
  else if (v != "info")
    spdlog::warn("CRLMESH_LOG={} not one of error, info, debug; using info", v);
}

}  // namespace crlmesh::log
