#pragma once

#include <spdlog/spdlog.h>

namespace fednilm {

/// Library-wide stderr logger. Verbosity comes from the FEDNILM_LOG
/// environment variable (trace, debug, info, warn, error, off; default warn).
spdlog::logger& logger();

}  // namespace fednilm
