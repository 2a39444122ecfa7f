#include "bvae/cli.hpp"
#include "bvae/trainer.hpp"

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  bvae::tune_allocator();
  return bvae::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
