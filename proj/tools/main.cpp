#include <string>
#include <vector>

#include "cbo/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cbo::cli::run_cli(args);
}
