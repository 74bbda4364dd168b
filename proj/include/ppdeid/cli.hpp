#pragma once

#include <string>
#include <vector>

namespace ppdeid {

/// Entry point shared by the `ppdeid` binary and the test suite.
/// Returns 0 on success, 2 on usage errors, 1 on module errors (which
/// are printed as a single machine-readable JSON line on stderr).
int cli_run(const std::vector<std::string>& args);

} // namespace ppdeid
