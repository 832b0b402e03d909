#include "cube3d/cli.hpp"

int main(int argc, char** argv) { return cube3d::cli::dispatch(argc, argv); }
