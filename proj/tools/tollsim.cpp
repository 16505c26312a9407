#include "tollsim/cli.hpp"

int main(int argc, char** argv) {
    return tollsim::cli::run_cli(argc, argv);
}
