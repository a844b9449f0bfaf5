#include <string>
#include <vector>

#include "klflow/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return klflow::run_cli(args);
}
