#include "grouprec/commands.hpp"

int main(int argc, char** argv) { return grouprec::cli::run_cli(argc, argv); }
