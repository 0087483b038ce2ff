#include <iostream>
#include <string>
#include <vector>

#include "paperprint/cli.hpp"

int main(int argc, char** argv)
{
    return paperprint::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
