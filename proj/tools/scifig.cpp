#include <iostream>

#include "scifig/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return scifig::cli::run(args, std::cout, std::cerr);
}
