#include "uavlora/experiment.hpp"

int main(int argc, char** argv) { return uavlora::run_cli(argc, argv); }
