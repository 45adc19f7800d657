#include "raccon/cli.hpp"

int main(int argc, char** argv) { return raccon::cli::run(argc, argv); }
