#include <iostream>

#include "hemocnn/cli.hpp"

int main(int argc, char** argv) {
    return hemocnn::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
