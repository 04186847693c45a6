#pragma once

#include <string>
#include <vector>

namespace ksyn {

// Batch CLI entry point. Exit codes: 0 success, 2 invalid input,
// 3 data/parse error, 4 numeric failure, 5 task failure.
int run_cli(const std::vector<std::string>& args);

} // namespace ksyn
