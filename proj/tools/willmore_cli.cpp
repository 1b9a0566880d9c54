#include <willmore/cli.hpp>

int main(int argc, char** argv) { return willmore::cli_main(argc, argv); }
