#include "qoe/cli.hpp"

int main(int argc, char** argv) { return qoe::cli_main(argc, argv); }
