#include "salmonkit/cli.hpp"

int main(int argc, char** argv) {
    return salmon::run(argc, argv);
}
