#include <doctest.h>

TEST_SUITE_BEGIN("ssm");
TEST_SUITE_END();
