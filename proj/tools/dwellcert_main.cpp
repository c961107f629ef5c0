#include <string>
#include <vector>

#include "dwellcert/cli.hpp"

int main(int argc, char** argv) {
  return dwellcert::cli::run(std::vector<std::string>(argv, argv + argc));
}
