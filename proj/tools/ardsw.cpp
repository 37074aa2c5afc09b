#include "ards/cli.hpp"

int main(int argc, char** argv) {
    return ards::cli_main(argc, argv);
}
