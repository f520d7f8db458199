#include <string>
#include <vector>

#include "ofvio/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ofvio::cli_dispatch(args);
}
