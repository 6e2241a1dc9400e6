#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "ldmt/nn.hpp"

int main(int argc, char** argv) {
    ldmt::configure_allocator();
    doctest::Context ctx(argc, argv);
    return ctx.run();
}
