// Single compilation of the amalgamated Catch2 sources shared by every test
// binary. Provides main().
#include <catch2/catch_amalgamated.cpp>
