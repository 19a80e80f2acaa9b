#include <string>
#include <vector>

#include "crossway/cli.hpp"

int main(int argc, char** argv) {
    return crossway::run_main(std::vector<std::string>(argv + 1, argv + argc));
}
