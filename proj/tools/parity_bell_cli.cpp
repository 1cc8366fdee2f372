#include <iostream>
#include <string>
#include <vector>

#include "parity_bell/cli.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return parity_bell::cmd_dispatch(args, std::cout, std::cerr);
}
