#pragma once

#include <string>
#include <vector>

namespace ecc::cli {

// Entry point behind the `ecc` binary. Subcommands: train, eval,
// export-code, mask-dump, grad-check, standardize. Returns the process
// exit status.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace ecc::cli
