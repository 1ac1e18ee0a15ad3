#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace transvqa {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
/// `args` excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace transvqa
