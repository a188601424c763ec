#include "intellipred/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return intellipred::cli::run(argc, argv, std::cout, std::cerr);
}
