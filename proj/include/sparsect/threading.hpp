#pragma once

namespace sparsect {

/// Applies the SPARSECT_THREADS worker cap if the variable is set.
/// Called once at process start by the CLI and the test binaries.
void apply_thread_cap_from_env();

}  // namespace sparsect
