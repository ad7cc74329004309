#include <iostream>

#include "csiadv/cli/app.hpp"
#include "csiadv/util/malloc_tuning.hpp"

int main(int argc, char** argv) {
  csiadv::tune_allocator();
  return csiadv::cli::run(argc, argv, std::cout, std::cerr);
}
