#include "hncr/cli.hpp"

int main(int argc, char** argv) { return hncr::cli::run(argc, argv); }
