#include "rdsa/cli.hpp"

int main(int argc, char** argv) {
    return rdsa::cli::run(argc, argv);
}
