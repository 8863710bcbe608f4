#include <iostream>

#include "blfmrac/cli.hpp"

int main(int argc, char** argv) {
    return blfmrac::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
