#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "bvae/trainer.hpp"

int main(int argc, char** argv) {
  bvae::tune_allocator();
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
