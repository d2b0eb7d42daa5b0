#include "irg/cli.hpp"

int main(int argc, char** argv) { return irg::cli_dispatch(argc, argv); }
