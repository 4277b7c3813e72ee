#include "cli.hpp"

int main(int argc, char** argv) { return msg::cli::cli_main(argc, argv); }
