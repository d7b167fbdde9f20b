#include <iostream>

#include "groupop/cli.hpp"

int main(int argc, char** argv)
{
    return groupop::cli::main_entry(argc, argv, std::cout, std::cerr);
}
