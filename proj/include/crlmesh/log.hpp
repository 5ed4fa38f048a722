#pragma once

#include <spdlog/spdlog.h>

namespace crlmesh::log {

/// Reads CRLMESH_LOG (error, info, debug) once; default is info.
void init_from_env();

}  // namespace crlmesh::log
