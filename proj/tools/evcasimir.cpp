#include "evcasimir/cli.hpp"

int main(int argc, char** argv) { return evc::cli::main(argc, argv); }
