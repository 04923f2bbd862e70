#include <string>
#include <vector>

#include "hazardbench/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hazardbench::run_cli(args);
}
