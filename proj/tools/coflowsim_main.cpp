#include "cfsim/analysis.hpp"

int main(int argc, char** argv) { return cfsim::analysis::run_cli(argc, argv); }
