#include "anisokpp/cli.hpp"

int main(int argc, char** argv) { return anisokpp::cli::run(argc, argv); }
