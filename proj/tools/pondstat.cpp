#include "pondstat/cli.hpp"

int main(int argc, char** argv) { return pondstat::run_cli(argc, argv); }
