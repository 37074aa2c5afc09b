#pragma once

namespace ards {

// Full command-line surface of the `ardsw` binary.  Parses argv, runs the
// requested pipeline step, and writes diagnostics to standard error with a
// machine-parsable prefix: "ardsw: usage: ..." for flag/subcommand problems,
// "ardsw: error: <ErrorKind>: ..." for runtime failures.  Returns 0 on
// success, 1 on runtime failure, 2 on usage errors.
int cli_main(int argc, const char* const* argv);

}  // namespace ards
