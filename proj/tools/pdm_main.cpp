#include "pdm/cli.hpp"

int main(int argc, char** argv) { return pdm::run_cli(argc, argv); }
