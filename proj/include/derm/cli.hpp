#pragma once

#include <string>
#include <vector>

namespace derm {

// Full command-line surface; the dermpipe binary is a thin wrapper. Returns
// the process exit status: 0 on success, 2 on validation/usage errors.
// Reports are printed to stdout as one JSON object per line.
int run_command(const std::vector<std::string>& args);

}  // namespace derm
