#pragma once

namespace entropytest {

/// Entry point for the `entropytest` command line tool.
///
/// Exit codes: 0 success, 1 usage or spec error, 2 invariant failure,
/// 3 codec or runtime error.
int cli_main(int argc, char** argv);

}  // namespace entropytest
