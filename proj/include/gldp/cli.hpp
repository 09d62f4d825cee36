#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gldp {

/// Entry point behind the gldp binary. Data goes to --output (default:
/// `out`); diagnostics go to `err`. Exit codes: 0 success, 1 validation
/// or usage error, 2 computational non-convergence.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace gldp
