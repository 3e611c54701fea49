#include "caml/harness/cli.hpp"

int main(int argc, char** argv) { return caml::harness::run_cli(argc, argv); }
