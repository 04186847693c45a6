#include <string>
#include <vector>

#include "ksyn/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ksyn::run_cli(args);
}
