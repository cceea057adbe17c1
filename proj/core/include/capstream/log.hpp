#pragma once

#include <memory>

namespace spdlog {
class logger;
}

namespace capstream {

/// Shared library logger. Verbosity comes from the CAPSTREAM_LOG environment
/// variable (trace, debug, info, warn, error, off); default is warn.
std::shared_ptr<spdlog::logger> logger();

}  // namespace capstream
