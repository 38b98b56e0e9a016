#include "ecc/cli.hpp"

#include <cstdio>

namespace ecc::cli {

int run(const std::vector<std::string>&) {
  std::fprintf(stderr, "cli: not wired up yet\n");
  return 1;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace ecc::cli
