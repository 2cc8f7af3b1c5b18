#pragma once

namespace caest::tools {

/// Runs the built-in oracle checks, prints one line per check and returns a
/// process exit code.
int run_selftest();

} // namespace caest::tools
