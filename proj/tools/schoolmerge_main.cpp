#include <string>
#include <vector>

#include "schoolmerge/cli.hpp"

int main(int argc, char** argv) {
  return schoolmerge::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
