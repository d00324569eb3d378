#include "adsv/harness.hpp"

int main(int argc, char** argv) { return adsv::run_cli(argc, argv); }
