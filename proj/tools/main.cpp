#include "cavicrys/cli.hpp"

int main(int argc, char** argv) { return cavicrys::run_cli(argc, argv); }
