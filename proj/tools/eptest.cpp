#include "eptest/cli.hpp"

int main(int argc, char** argv) { return eptest::run_cli(argc, argv); }
