#include <doctest.h>

TEST_SUITE_BEGIN("reduced");
TEST_SUITE_END();
