#pragma once

namespace rdsa::cli {

// Full command-line entry point (train / attack / augment / report / synth).
// Returns the process exit code: 0 ok, 2 config error, 3 data error,
// 4 training divergence, 5 pipeline contract violation.
int run(int argc, const char* const* argv);

}  // namespace rdsa::cli
