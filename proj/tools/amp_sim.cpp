#include <iostream>
#include <string>
#include <vector>

#include "ampsim/runner.hpp"

int main(int argc, char** argv) {
    return ampsim::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout,
                            std::cerr);
}
