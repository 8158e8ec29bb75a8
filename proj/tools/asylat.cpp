#include "cli_app.hpp"

int main(int argc, char** argv) { return asylat::cli::run(argc, argv); }
