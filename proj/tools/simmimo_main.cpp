#include "simmimo/experiment.hpp"

int main(int argc, char** argv) { return simmimo::cli_main(argc, argv); }
