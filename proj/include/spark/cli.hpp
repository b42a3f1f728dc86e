#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spark {

int run_cli(int argc, char** argv);

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            std::istream& in);

}  // namespace spark
