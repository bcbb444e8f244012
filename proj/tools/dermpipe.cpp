#include <vector>

#include "derm/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return derm::run_command(args);
}
