#include <string>
#include <vector>

#include "semfew_cli.hpp"

// Same as `semfew semevo ...`.
int main(int argc, char** argv) {
    std::vector<std::string> args{"semevo", "semevo"};
    args.insert(args.end(), argv + 1, argv + argc);
    return semfew::cli::run(args);
}
