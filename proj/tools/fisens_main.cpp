#include "fisens/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return fisens::cli::dispatch(argc, argv, std::cout, std::cerr);
}
