#pragma once

namespace cmrpipe {

/// Entry point of the `cmrpipe` tool. Returns 0 on success, 1 when cases
/// failed (an errors.json report is written) and 2 on usage or
/// configuration errors.
int run_cli(int argc, const char* const* argv);

}  // namespace cmrpipe
