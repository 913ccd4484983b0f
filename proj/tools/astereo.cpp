#include "astereo/harness.hpp"

int main(int argc, char** argv) { return astereo::cli(argc, argv); }
