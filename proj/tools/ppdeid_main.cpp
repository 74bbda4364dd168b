#include <string>
#include <vector>

#include "ppdeid/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ppdeid::cli_run(args);
}
