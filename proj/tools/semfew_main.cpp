#include <string>
#include <vector>

#include "semfew_cli.hpp"

int main(int argc, char** argv) {
    return semfew::cli::run(std::vector<std::string>(argv, argv + argc));
}
