#include "phaseonium/cli_io.hpp"

int main(int argc, char** argv) { return phaseonium::run_cli(argc, argv); }
