#include <string>
#include <vector>

#include "dco/config.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dco::run_cli(args);
}
