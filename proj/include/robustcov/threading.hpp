#pragma once

namespace robustcov {

/// Worker-thread budget for parallel regions: the OpenMP default, capped by
/// the ROBUSTCOV_THREADS environment variable when set. Returns 1 when built
/// without OpenMP. The environment is read once per process.
int effective_threads();

} // namespace robustcov
