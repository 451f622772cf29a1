#include <iostream>

#include "flowatlas/cli.hpp"

int main(int argc, char** argv)
{
    return flowatlas::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
