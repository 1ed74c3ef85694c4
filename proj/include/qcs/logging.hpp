#pragma once

namespace qcs {

/// Applies QCS_LOG_LEVEL (error, warn, info, debug) to the default logger.
/// Unset or unrecognised values leave the level at warn.
void configure_logging_from_env();

/// True when QCS_LOG_LEVEL=debug, which also turns on per-step invariant
/// audits in experiment runs.
bool debug_checks_enabled();

}  // namespace qcs
