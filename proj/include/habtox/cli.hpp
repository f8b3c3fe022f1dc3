#pragma once

#include <string>
#include <vector>

namespace habtox::cli {

// Exit codes: 0 success, 1 invalid use or failed computation, 2 schema error
// or missing input, 3 empty output. Failures print one JSON object on stderr.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace habtox::cli
