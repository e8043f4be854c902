#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace baryflow::cli {

enum ExitCode { kOk = 0, kConfigError = 1, kNumericalError = 2 };

// Each command reads a JSON config, writes its artifacts to the configured
// output directory and prints progress to out; errors go to err with an
// "error[<kind>]: " prefix.
int cmd_barycenter(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_toy(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_msda(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_gen(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_validate(const std::string& config_path, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

std::string git_describe();

} // namespace baryflow::cli
