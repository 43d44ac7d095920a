#include "cli.hpp"

int main(int argc, char** argv) { return gsroad::cli::run(argc, argv); }
