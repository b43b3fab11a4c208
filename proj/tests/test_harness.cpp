#include <catch2/catch_amalgamated.hpp>
#include "rinverse/rinverse.hpp"
TEST_CASE("placeholder test_harness") { CHECK(true); }
